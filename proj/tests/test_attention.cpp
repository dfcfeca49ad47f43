#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "csipred/attn/attention.hpp"
#include "csipred/attn/positional.hpp"
#include "csipred/rng.hpp"

using namespace csipred;
using TD = nn::Tensor<double>;

namespace {

// Literal replay of the multi-head attention pseudo-code in feature-major
// (d x l) layout with per-head scalar loops. No batching, no shared code
// with the implementation.
std::vector<double> mha_oracle(int64_t heads, int64_t d_attn, int64_t d_mid, int64_t d_x,
                               int64_t d_z, int64_t d_out, int64_t l_x, int64_t l_z,
                               const std::vector<double>& x_cols,   // [d_x][l_x]
                               const std::vector<double>& z_cols,   // [d_z][l_z]
                               const attn::AttentionMask* mask,
                               const std::vector<double>& wq, const std::vector<double>& wk,
                               const std::vector<double>& wv, const std::vector<double>& wo) {
  auto matmul_cols = [](const std::vector<double>& a, int64_t m, int64_t k,
                        const std::vector<double>& b, int64_t n) {
    std::vector<double> c(static_cast<size_t>(m * n), 0.0);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        for (int64_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
    return c;
  };
  auto q = matmul_cols(wq, heads * d_attn, d_x, x_cols, l_x);
  auto k = matmul_cols(wk, heads * d_attn, d_z, z_cols, l_z);
  auto v = matmul_cols(wv, heads * d_mid, d_z, z_cols, l_z);

  std::vector<double> merged(static_cast<size_t>(heads * d_mid * l_x), 0.0);
  for (int64_t h = 0; h < heads; ++h) {
    // scores S = K_h^T Q_h, [l_z x l_x]
    std::vector<double> s(static_cast<size_t>(l_z * l_x), 0.0);
    for (int64_t j = 0; j < l_z; ++j)
      for (int64_t c = 0; c < l_x; ++c)
        for (int64_t p = 0; p < d_attn; ++p)
          s[j * l_x + c] += k[(h * d_attn + p) * l_z + j] * q[(h * d_attn + p) * l_x + c];
    if (mask)
      for (int64_t j = 0; j < l_z; ++j)
        for (int64_t c = 0; c < l_x; ++c)
          if (!mask->at(j, c)) s[j * l_x + c] = -std::numeric_limits<double>::infinity();
    // column-wise softmax of S / sqrt(d_attn)
    std::vector<double> w(static_cast<size_t>(l_z * l_x));
    for (int64_t c = 0; c < l_x; ++c) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < l_z; ++j) mx = std::max(mx, s[j * l_x + c] / std::sqrt(double(d_attn)));
      double sum = 0;
      for (int64_t j = 0; j < l_z; ++j) {
        const double e = std::exp(s[j * l_x + c] / std::sqrt(double(d_attn)) - mx);
        w[j * l_x + c] = e;
        sum += e;
      }
      for (int64_t j = 0; j < l_z; ++j) w[j * l_x + c] /= sum;
    }
    // V~_h = V_h * softmax
    for (int64_t i = 0; i < d_mid; ++i)
      for (int64_t c = 0; c < l_x; ++c) {
        double acc = 0;
        for (int64_t j = 0; j < l_z; ++j) acc += v[(h * d_mid + i) * l_z + j] * w[j * l_x + c];
        merged[(h * d_mid + i) * l_x + c] = acc;
      }
  }
  // Y = W_o * merged, [d_out x l_x]
  return matmul_cols(wo, d_out, heads * d_mid, merged, l_x);
}

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// position-major [l, d] from feature-major [d][l]
std::vector<double> to_rows(const std::vector<double>& cols, int64_t d, int64_t l) {
  std::vector<double> rows(static_cast<size_t>(d * l));
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < l; ++j) rows[j * d + i] = cols[i * l + j];
  return rows;
}

}  // namespace

TEST_CASE("single-token self-attention through unit weights is identity") {
  Rng rng(1);
  auto p = attn::MhaParams<double>::create(1, 1, 1, 1, 1, 1, rng);
  p.w_q.mutable_values() = {1};
  p.w_k.mutable_values() = {1};
  p.w_v.mutable_values() = {1};
  p.w_o.mutable_values() = {1};
  for (double x : {0.3, -2.0, 5.0}) {
    TD in = TD::from_data({1, 1}, {x});
    TD out = attn::multi_head_attention(in, in, nullptr, p);
    CHECK(out.item() == doctest::Approx(x).epsilon(1e-15));
  }
}

TEST_CASE("identical context columns give the common projected value") {
  Rng rng(2);
  const int64_t d = 3;
  auto p = attn::MhaParams<double>::create(2, 2, 2, d, d, d, rng);
  std::vector<double> col = {0.5, -1.0, 2.0};
  std::vector<double> z(2 * d);
  for (int64_t j = 0; j < 2; ++j)
    for (int64_t i = 0; i < d; ++i) z[j * d + i] = col[i];
  TD zt = TD::from_data({2, d}, z);
  TD x = TD::from_data({1, d}, random_vec(d, rng));
  TD out = attn::multi_head_attention(x, zt, nullptr, p);
  // With identical keys/values any attention weights mix the same value.
  TD single = attn::multi_head_attention(x, TD::from_data({1, d}, col), nullptr, p);
  for (int64_t i = 0; i < d; ++i) CHECK(out.at(i) == doctest::Approx(single.at(i)).epsilon(1e-12));
}

TEST_CASE("random tiny instance matches the per-head loop oracle") {
  Rng rng(3);
  const int64_t H = 2, d_attn = 3, d_mid = 2, d_x = 4, d_z = 5, d_out = 4, l_x = 3, l_z = 3;
  auto p = attn::MhaParams<double>::create(H, d_attn, d_mid, d_x, d_z, d_out, rng);
  auto x_cols = random_vec(static_cast<size_t>(d_x * l_x), rng);
  auto z_cols = random_vec(static_cast<size_t>(d_z * l_z), rng);

  for (bool masked : {false, true}) {
    attn::AttentionMask mask = attn::causal_mask(l_x);
    const attn::AttentionMask* mp = masked ? &mask : nullptr;
    auto expect = mha_oracle(H, d_attn, d_mid, d_x, d_z, d_out, l_x, l_z, x_cols, z_cols, mp,
                             p.w_q.values(), p.w_k.values(), p.w_v.values(), p.w_o.values());
    TD x = TD::from_data({l_x, d_x}, to_rows(x_cols, d_x, l_x));
    TD z = TD::from_data({l_z, d_z}, to_rows(z_cols, d_z, l_z));
    TD y = attn::multi_head_attention(x, z, mp, p);
    for (int64_t i = 0; i < d_out; ++i)
      for (int64_t j = 0; j < l_x; ++j)
        CHECK(y.at(j * d_out + i) == doctest::Approx(expect[i * l_x + j]).epsilon(1e-12));
  }
}

TEST_CASE("causal mask structure") {
  auto m1 = attn::causal_mask(1);
  CHECK(m1.at(0, 0));
  auto m3 = attn::causal_mask(3);
  for (int64_t j = 0; j < 3; ++j)
    for (int64_t k = 0; k < 3; ++k) CHECK(m3.at(j, k) == (j <= k));
  int64_t trues = 0;
  for (int64_t k = 0; k < 3; ++k) {
    int64_t col = 0;
    for (int64_t j = 0; j < 3; ++j) col += m3.at(j, k) ? 1 : 0;
    CHECK(col == k + 1);
    trues += col;
  }
  CHECK(trues == 6);
  CHECK_THROWS_AS(attn::causal_mask(0), ContractError);
}

TEST_CASE("masked self-attention: future perturbations leave earlier outputs bitwise unchanged") {
  Rng rng(5);
  const int64_t d = 4;
  auto p = attn::MhaParams<double>::create(2, 3, 3, d, d, d, rng);
  for (int64_t l = 1; l <= 6; ++l) {
    auto mask = attn::causal_mask(l);
    auto base_rows = random_vec(static_cast<size_t>(l * d), rng);
    TD x0 = TD::from_data({l, d}, base_rows);
    TD y0 = attn::multi_head_attention(x0, x0, &mask, p);
    for (int64_t k = 0; k + 1 < l; ++k) {
      auto perturbed = base_rows;
      for (int64_t i = 0; i < d; ++i) perturbed[(k + 1) * d + i] += rng.uniform(0.5, 1.5);
      TD x1 = TD::from_data({l, d}, perturbed);
      TD y1 = attn::multi_head_attention(x1, x1, &mask, p);
      for (int64_t pos = 0; pos <= k; ++pos)
        for (int64_t i = 0; i < d; ++i) CHECK(y1.at(pos * d + i) == y0.at(pos * d + i));
    }
  }
}

TEST_CASE("mask with an empty row of support is rejected") {
  Rng rng(6);
  auto p = attn::MhaParams<double>::create(1, 2, 2, 3, 3, 3, rng);
  attn::AttentionMask mask;
  mask.l_z = 2;
  mask.l_x = 2;
  mask.allowed = {1, 0, 1, 0};  // query 1 sees nothing
  TD x = TD::from_data({2, 3}, random_vec(6, rng));
  CHECK_THROWS_AS(attn::multi_head_attention(x, x, &mask, p), ContractError);
}

TEST_CASE("output is invariant under head permutation with permuted weight blocks") {
  Rng rng(7);
  const int64_t H = 3, d_attn = 2, d_mid = 2, d = 4;
  auto p = attn::MhaParams<double>::create(H, d_attn, d_mid, d, d, d, rng);
  auto q = attn::MhaParams<double>::create(H, d_attn, d_mid, d, d, d, rng);
  // q = p with heads rotated by one: head h <- head (h+1) % H
  auto rotate_rows = [&](const TD& src, TD& dst, int64_t rows_per_head, int64_t cols) {
    for (int64_t h = 0; h < H; ++h) {
      const int64_t from = ((h + 1) % H) * rows_per_head;
      for (int64_t r = 0; r < rows_per_head; ++r)
        for (int64_t c = 0; c < cols; ++c)
          dst.mutable_values()[(h * rows_per_head + r) * cols + c] =
              src.values()[(from + r) * cols + c];
    }
  };
  rotate_rows(p.w_q, q.w_q, d_attn, d);
  rotate_rows(p.w_k, q.w_k, d_attn, d);
  rotate_rows(p.w_v, q.w_v, d_mid, d);
  // w_o columns permute with the heads: [d_out, H*d_mid]
  for (int64_t h = 0; h < H; ++h) {
    const int64_t from = ((h + 1) % H) * d_mid;
    for (int64_t r = 0; r < d; ++r)
      for (int64_t c = 0; c < d_mid; ++c)
        q.w_o.mutable_values()[r * H * d_mid + h * d_mid + c] =
            p.w_o.values()[r * H * d_mid + from + c];
  }
  TD x = TD::from_data({3, d}, random_vec(12, rng));
  TD ya = attn::multi_head_attention(x, x, nullptr, p);
  TD yb = attn::multi_head_attention(x, x, nullptr, q);
  for (int64_t i = 0; i < ya.numel(); ++i) CHECK(ya.at(i) == doctest::Approx(yb.at(i)).epsilon(1e-6));
}

TEST_CASE("constant score columns give uniform attention weights") {
  Rng rng(8);
  const int64_t l = 4, d = 3;
  // All-zero queries make every score zero, so softmax is uniform over the
  // context; the output must equal the mean of per-column single-token runs.
  auto pm = attn::MhaParams<double>::create(1, 2, 2, d, d, d, rng);
  pm.w_q.mutable_values().assign(pm.w_q.values().size(), 0.0);
  TD z = TD::from_data({l, d}, random_vec(static_cast<size_t>(l * d), rng));
  TD x = TD::from_data({1, d}, random_vec(d, rng));
  TD y = attn::multi_head_attention(x, z, nullptr, pm);
  TD mean_ref = TD::zeros({1, d});
  for (int64_t j = 0; j < l; ++j) {
    TD zj = nn::slice(z, 0, j, 1);
    TD yj = attn::multi_head_attention(x, zj, nullptr, pm);
    for (int64_t i = 0; i < d; ++i) mean_ref.mutable_values()[i] += yj.at(i) / l;
  }
  for (int64_t i = 0; i < d; ++i) CHECK(y.at(i) == doctest::Approx(mean_ref.at(i)).epsilon(1e-12));
}

TEST_CASE("positional encoding values") {
  auto pe = attn::positional_encoding<double>(4, 6);
  for (int64_t i = 0; i < 3; ++i) {
    CHECK(pe.at(0, 2 * i) == 0.0);
    CHECK(pe.at(0, 2 * i + 1) == 1.0);
  }
  CHECK(pe.at(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(pe.at(1, 0) == doctest::Approx(0.8414710).epsilon(1e-6));

  auto pe64 = attn::positional_encoding<double>(12, 64);
  const double expect = std::sin(10.0 / std::pow(10000.0, 62.0 / 64.0));
  CHECK(pe64.at(10, 62) == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(attn::positional_encoding<double>(4, 7), ContractError);

  for (double v : pe64.table.values()) {
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
  }
}

TEST_CASE("reverse positional encoding definition and involution") {
  auto pe1 = attn::positional_encoding<double>(1, 8);
  auto rpe1 = attn::reverse_positional_encoding<double>(1, 8);
  CHECK(pe1.table.values() == rpe1.table.values());
  CHECK(rpe1.reversed);

  auto pe4 = attn::positional_encoding<double>(4, 8);
  auto rpe4 = attn::reverse_positional_encoding<double>(4, 8);
  for (int64_t d = 0; d < 8; ++d) {
    CHECK(rpe4.at(0, d) == pe4.at(3, d));
    CHECK(rpe4.at(3, d) == pe4.at(0, d));
  }
  for (int64_t len : {2, 5, 9}) {
    auto pe = attn::positional_encoding<double>(len, 8);
    auto rpe = attn::reverse_positional_encoding<double>(len, 8);
    for (int64_t j = 0; j < len; ++j)
      for (int64_t d = 0; d < 8; ++d) CHECK(rpe.at(j, d) == pe.at(len - 1 - j, d));
    // reversing twice reproduces the forward table bitwise
    std::vector<double> twice(static_cast<size_t>(len * 8));
    for (int64_t j = 0; j < len; ++j)
      for (int64_t d = 0; d < 8; ++d) twice[j * 8 + d] = rpe.at(len - 1 - j, d);
    CHECK(twice == pe.table.values());
  }
}

TEST_CASE("most recent snapshot gets the same reversed-PE row for any length") {
  const int64_t d_model = 64;
  auto r8 = attn::reverse_positional_encoding<float>(8, d_model);
  auto r14 = attn::reverse_positional_encoding<float>(14, d_model);
  auto r16 = attn::reverse_positional_encoding<float>(16, d_model);
  for (int64_t k = 0; k < 8; ++k)
    for (int64_t d = 0; d < d_model; ++d) {
      const float b8 = r8.at(8 - 1 - k, d);
      const float b14 = r14.at(14 - 1 - k, d);
      const float b16 = r16.at(16 - 1 - k, d);
      CHECK(b8 == b14);
      CHECK(b14 == b16);
    }
  // standard PE: the bias of the most recent snapshot depends on the length
  auto p8 = attn::positional_encoding<float>(8, d_model);
  auto p16 = attn::positional_encoding<float>(16, d_model);
  bool differs = false;
  for (int64_t d = 0; d < d_model; ++d) differs = differs || p8.at(7, d) != p16.at(15, d);
  CHECK(differs);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "csipred/kernels/kernels.hpp"
#include "csipred/rng.hpp"

using namespace csipred;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

// Triple-loop double-precision oracle for all three gemm forms.
std::vector<double> gemm_oracle(char form, int64_t m, int64_t n, int64_t k,
                                const std::vector<float>& a, const std::vector<float>& b) {
  std::vector<double> c(static_cast<size_t>(m * n), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double s = 0;
      for (int64_t p = 0; p < k; ++p) {
        double av, bv;
        if (form == 'n') {  // nn
          av = a[i * k + p];
          bv = b[p * n + j];
        } else if (form == 't') {  // nt: b is [n x k]
          av = a[i * k + p];
          bv = b[j * k + p];
        } else {  // tn: a is [k(rows=r) x m]; here k means r
          av = a[p * m + i];
          bv = b[p * n + j];
        }
        s += av * bv;
      }
      c[i * n + j] = s;
    }
  return c;
}

struct IsaSet {
  std::vector<kernels::Isa> isas;
  IsaSet() {
    isas.push_back(kernels::Isa::scalar);
    if (kernels::cpu_supports_avx2()) isas.push_back(kernels::Isa::avx2);
  }
  ~IsaSet() { kernels::reset_isa(); }
};

}  // namespace

TEST_CASE("gemm variants match triple-loop oracle on both ISAs") {
  Rng rng(42);
  IsaSet set;
  for (auto isa : set.isas) {
    kernels::force_isa(isa);
    CAPTURE(kernels::isa_name(isa));
    for (auto [m, n, k] : std::vector<std::tuple<int64_t, int64_t, int64_t>>{
             {1, 1, 1}, {3, 5, 7}, {2, 4, 8}, {13, 9, 17}, {33, 65, 19}, {100, 128, 192}}) {
      auto a = random_vec(static_cast<size_t>(m * k), rng);
      auto b_nn = random_vec(static_cast<size_t>(k * n), rng);
      auto b_nt = random_vec(static_cast<size_t>(n * k), rng);
      auto a_tn = random_vec(static_cast<size_t>(k * m), rng);

      std::vector<float> c(static_cast<size_t>(m * n), 0.0f);
      kernels::gemm_nn_f32(false, m, n, k, a.data(), k, b_nn.data(), n, c.data(), n);
      auto ref = gemm_oracle('n', m, n, k, a, b_nn);
      for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-4));

      kernels::gemm_nt_f32(false, m, n, k, a.data(), k, b_nt.data(), k, c.data(), n);
      ref = gemm_oracle('t', m, n, k, a, b_nt);
      for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-4));

      kernels::gemm_tn_f32(false, m, n, k, a_tn.data(), m, b_nn.data(), n, c.data(), n);
      ref = gemm_oracle('x', m, n, k, a_tn, b_nn);
      for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-4));
    }
  }
}

TEST_CASE("gemm accumulate flag adds onto existing values") {
  Rng rng(7);
  IsaSet set;
  for (auto isa : set.isas) {
    kernels::force_isa(isa);
    const int64_t m = 5, n = 6, k = 9;
    auto a = random_vec(static_cast<size_t>(m * k), rng);
    auto b = random_vec(static_cast<size_t>(k * n), rng);
    std::vector<float> base = random_vec(static_cast<size_t>(m * n), rng);
    std::vector<float> once(base);
    kernels::gemm_nn_f32(false, m, n, k, a.data(), k, b.data(), n, once.data(), n);
    std::vector<float> acc(base);
    kernels::gemm_nn_f32(true, m, n, k, a.data(), k, b.data(), n, acc.data(), n);
    for (size_t i = 0; i < acc.size(); ++i)
      CHECK(acc[i] == doctest::Approx(base[i] + once[i]).epsilon(1e-5));
  }
}

TEST_CASE("avx2 and scalar kernels agree within float tolerance") {
  if (!kernels::cpu_supports_avx2()) return;
  Rng rng(3);
  const int64_t m = 37, n = 53, k = 71;
  auto a = random_vec(static_cast<size_t>(m * k), rng);
  auto b = random_vec(static_cast<size_t>(n * k), rng);
  std::vector<float> c_scalar(static_cast<size_t>(m * n)), c_avx2(c_scalar);
  kernels::force_isa(kernels::Isa::scalar);
  kernels::gemm_nt_f32(false, m, n, k, a.data(), k, b.data(), k, c_scalar.data(), n);
  kernels::force_isa(kernels::Isa::avx2);
  kernels::gemm_nt_f32(false, m, n, k, a.data(), k, b.data(), k, c_avx2.data(), n);
  kernels::reset_isa();
  for (size_t i = 0; i < c_scalar.size(); ++i)
    CHECK(c_avx2[i] == doctest::Approx(c_scalar[i]).epsilon(1e-5));

  auto x = random_vec(10007, rng);
  auto y = random_vec(10007, rng);
  std::vector<float> out_s(x.size()), out_v(x.size());
  kernels::force_isa(kernels::Isa::scalar);
  kernels::mul_f32(static_cast<int64_t>(x.size()), x.data(), y.data(), out_s.data());
  const float sum_s = kernels::reduce_sum_f32(static_cast<int64_t>(x.size()), x.data());
  kernels::force_isa(kernels::Isa::avx2);
  kernels::mul_f32(static_cast<int64_t>(x.size()), x.data(), y.data(), out_v.data());
  const float sum_v = kernels::reduce_sum_f32(static_cast<int64_t>(x.size()), x.data());
  kernels::reset_isa();
  CHECK(out_s == out_v);  // products are exact per element
  CHECK(sum_v == doctest::Approx(sum_s).epsilon(1e-5));
}

TEST_CASE("dispatched kernels are deterministic across repeated calls") {
  Rng rng(11);
  const int64_t m = 64, n = 48, k = 80;
  auto a = random_vec(static_cast<size_t>(m * k), rng);
  auto b = random_vec(static_cast<size_t>(k * n), rng);
  std::vector<float> c1(static_cast<size_t>(m * n)), c2(c1);
  kernels::gemm_nn_f32(false, m, n, k, a.data(), k, b.data(), n, c1.data(), n);
  kernels::gemm_nn_f32(false, m, n, k, a.data(), k, b.data(), n, c2.data(), n);
  CHECK(c1 == c2);

  // Thread count must not change results (rows are partitioned, not reduced).
  const int saved = kernels::thread_count();
  kernels::set_thread_count(1);
  std::vector<float> c3(static_cast<size_t>(m * n));
  kernels::gemm_nn_f32(false, m, n, k, a.data(), k, b.data(), n, c3.data(), n);
  kernels::set_thread_count(saved);
  CHECK(c1 == c3);
}

TEST_CASE("softmax_rows is stabilized and normalized") {
  IsaSet set;
  for (auto isa : set.isas) {
    kernels::force_isa(isa);
    std::vector<float> x = {1000.0f, 0.0f, 0.0f, 0.0f, -500.0f, 2.0f, 2.0f, 2.0f};
    std::vector<float> y(x.size());
    kernels::softmax_rows_f32(2, 4, x.data(), y.data());
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(y[1] == 0.0f);
    for (int64_t r = 0; r < 2; ++r) {
      float s = 0;
      for (int64_t j = 0; j < 4; ++j) {
        s += y[r * 4 + j];
        CHECK(std::isfinite(y[r * 4 + j]));
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("adam kernel matches scalar formula and is bitwise repeatable") {
  IsaSet set;
  Rng rng(5);
  auto g = random_vec(1001, rng);
  for (auto isa : set.isas) {
    kernels::force_isa(isa);
    std::vector<float> p1(1001, 1.0f), m1(1001, 0.0f), v1(1001, 0.0f);
    std::vector<float> p2(p1), m2(m1), v2(v1);
    const float c1 = 1.0f / (1.0f - 0.9f), c2 = 1.0f / (1.0f - 0.999f);
    kernels::adam_update_f32(1001, p1.data(), g.data(), m1.data(), v1.data(), 1e-3f, 0.9f,
                             0.999f, 1e-8f, c1, c2);
    kernels::adam_update_f32(1001, p2.data(), g.data(), m2.data(), v2.data(), 1e-3f, 0.9f,
                             0.999f, 1e-8f, c1, c2);
    CHECK(p1 == p2);
    CHECK(m1 == m2);
    // First-step closed form: update = lr * g / (|g| + eps) ~ lr * sign(g).
    for (size_t i = 0; i < 16; ++i) {
      const double expect = 1.0 - 1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
      CHECK(p1[i] == doctest::Approx(expect).epsilon(1e-3));
    }
  }
}

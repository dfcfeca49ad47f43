#pragma once

// Multi-head (masked) self- or cross-attention. Four projection matrices and
// no bias terms. Sequences are stored position-major, [*, len, dim]; the
// per-head score matrix is the transpose of the feature-major convention but
// the arithmetic is identical (softmax normalizes over the context axis).

#include <cstdint>
#include <limits>
#include <vector>

#include "csipred/nn/ops.hpp"
#include "csipred/nn/tensor.hpp"
#include "csipred/rng.hpp"

namespace csipred::attn {

using nn::Shape;
using nn::Tensor;

// allowed(j, k): may query position k attend to context position j.
struct AttentionMask {
  int64_t l_z = 0;  // context length (rows)
  int64_t l_x = 0;  // query length (cols)
  std::vector<uint8_t> allowed;

  bool at(int64_t j, int64_t k) const { return allowed[static_cast<size_t>(j * l_x + k)] != 0; }
};

// Causal pattern: query k sees context 0..k.
inline AttentionMask causal_mask(int64_t l) {
  if (l < 1) throw ContractError("causal_mask: length must be >= 1");
  AttentionMask m;
  m.l_z = l;
  m.l_x = l;
  m.allowed.assign(static_cast<size_t>(l * l), 0);
  for (int64_t j = 0; j < l; ++j)
    for (int64_t k = j; k < l; ++k) m.allowed[static_cast<size_t>(j * l + k)] = 1;
  return m;
}

template <typename Real>
struct MhaParams {
  int64_t heads = 1;
  int64_t d_attn = 1;
  int64_t d_mid = 1;
  Tensor<Real> w_q;  // [H*d_attn, d_x]
  Tensor<Real> w_k;  // [H*d_attn, d_z]
  Tensor<Real> w_v;  // [H*d_mid,  d_z]
  Tensor<Real> w_o;  // [d_out,    H*d_mid]

  static MhaParams create(int64_t heads, int64_t d_attn, int64_t d_mid, int64_t d_x,
                          int64_t d_z, int64_t d_out, Rng& rng) {
    MhaParams p;
    p.heads = heads;
    p.d_attn = d_attn;
    p.d_mid = d_mid;
    p.w_q = Tensor<Real>::param_glorot({heads * d_attn, d_x}, d_x, heads * d_attn, rng);
    p.w_k = Tensor<Real>::param_glorot({heads * d_attn, d_z}, d_z, heads * d_attn, rng);
    p.w_v = Tensor<Real>::param_glorot({heads * d_mid, d_z}, d_z, heads * d_mid, rng);
    p.w_o = Tensor<Real>::param_glorot({d_out, heads * d_mid}, heads * d_mid, d_out, rng);
    return p;
  }

  int64_t d_x() const { return w_q.dim(1); }
  int64_t d_z() const { return w_k.dim(1); }
  int64_t d_out() const { return w_o.dim(0); }

  std::vector<Tensor<Real>*> params() { return {&w_q, &w_k, &w_v, &w_o}; }
};

// X: [*, l_x, d_x] queries, Z: [*, l_z, d_z] context, result [*, l_x, d_out].
// Masked score entries are pinned to the most negative finite value before
// the stabilized softmax, which yields exactly zero attention weight.
template <typename Real>
Tensor<Real> multi_head_attention(const Tensor<Real>& x, const Tensor<Real>& z,
                                  const AttentionMask* mask, MhaParams<Real>& p) {
  const int64_t l_x = x.dim(-2);
  const int64_t l_z = z.dim(-2);
  if (x.dim(-1) != p.d_x())
    throw ShapeError("multi_head_attention: query dim mismatch");
  if (z.dim(-1) != p.d_z())
    throw ShapeError("multi_head_attention: context dim mismatch");

  Tensor<Real> keep, neg;
  if (mask) {
    if (mask->l_x != l_x || mask->l_z != l_z)
      throw ShapeError("multi_head_attention: mask is " + std::to_string(mask->l_z) + "x" +
                           std::to_string(mask->l_x) + " but sequences are l_z=" +
                           std::to_string(l_z) + ", l_x=" + std::to_string(l_x));
    // Scores are laid out [l_x, l_z]; mask->allowed is [l_z, l_x].
    std::vector<Real> keep_v(static_cast<size_t>(l_x * l_z));
    std::vector<Real> neg_v(static_cast<size_t>(l_x * l_z));
    for (int64_t k = 0; k < l_x; ++k) {
      bool any = false;
      for (int64_t j = 0; j < l_z; ++j) {
        const bool ok = mask->at(j, k);
        any = any || ok;
        keep_v[static_cast<size_t>(k * l_z + j)] = ok ? Real(1) : Real(0);
        neg_v[static_cast<size_t>(k * l_z + j)] = ok ? Real(0) : std::numeric_limits<Real>::lowest();
      }
      if (!any)
        throw ContractError("multi_head_attention: query position " + std::to_string(k) +
                                " has no allowed context (softmax over empty support)");
    }
    keep = Tensor<Real>::from_data({l_x, l_z}, std::move(keep_v));
    neg = Tensor<Real>::from_data({l_x, l_z}, std::move(neg_v));
  }

  Tensor<Real> q = nn::matmul(x, p.w_q, /*trans_b=*/true);  // [*, l_x, H*d_attn]
  Tensor<Real> k = nn::matmul(z, p.w_k, /*trans_b=*/true);  // [*, l_z, H*d_attn]
  Tensor<Real> v = nn::matmul(z, p.w_v, /*trans_b=*/true);  // [*, l_z, H*d_mid]

  const Real inv_sqrt_dattn = Real(1) / static_cast<Real>(std::sqrt(static_cast<double>(p.d_attn)));
  std::vector<Tensor<Real>> head_outputs;
  head_outputs.reserve(static_cast<size_t>(p.heads));
  for (int64_t h = 0; h < p.heads; ++h) {
    Tensor<Real> qh = nn::slice(q, -1, h * p.d_attn, p.d_attn);
    Tensor<Real> kh = nn::slice(k, -1, h * p.d_attn, p.d_attn);
    Tensor<Real> vh = nn::slice(v, -1, h * p.d_mid, p.d_mid);
    Tensor<Real> scores = nn::scale(nn::matmul(qh, kh, /*trans_b=*/true), inv_sqrt_dattn);
    if (mask) scores = nn::add(nn::mul(scores, keep), neg);
    Tensor<Real> weights = nn::softmax(scores, -1);          // [*, l_x, l_z]
    head_outputs.push_back(nn::matmul(weights, vh));         // [*, l_x, d_mid]
  }
  Tensor<Real> merged = p.heads == 1 ? head_outputs[0] : nn::concat(head_outputs, -1);
  return nn::matmul(merged, p.w_o, /*trans_b=*/true);  // [*, l_x, d_out]
}

}  // namespace csipred::attn

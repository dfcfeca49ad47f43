#pragma once

#include <vector>

#include "csipred/nn/ops.hpp"
#include "csipred/nn/tensor.hpp"
#include "csipred/rng.hpp"

namespace csipred::nn {

// y = W x + b applied along the trailing dim.
template <typename Real>
struct LinearParams {
  Tensor<Real> weight;  // [out_dim, in_dim]
  Tensor<Real> bias;    // [out_dim]

  static LinearParams create(int64_t in_dim, int64_t out_dim, Rng& rng) {
    LinearParams p;
    p.weight = Tensor<Real>::param_glorot({out_dim, in_dim}, in_dim, out_dim, rng);
    p.bias = Tensor<Real>::param_zeros({out_dim});
    return p;
  }

  int64_t in_dim() const { return weight.dim(1); }
  int64_t out_dim() const { return weight.dim(0); }

  std::vector<Tensor<Real>*> params() { return {&weight, &bias}; }
};

template <typename Real>
Tensor<Real> linear_forward(const Tensor<Real>& x, LinearParams<Real>& p) {
  if (x.dim(-1) != p.in_dim())
    throw ShapeError("linear_forward: input dim " + std::to_string(x.dim(-1)) +
                     " != weight in_dim " + std::to_string(p.in_dim()));
  return add(matmul(x, p.weight, /*trans_b=*/true), p.bias);
}

template <typename Real>
struct LayerNormParams {
  Tensor<Real> gain;  // [d]
  Tensor<Real> bias;  // [d]
  Real epsilon;

  static LayerNormParams create(int64_t d, Real eps = Real(1e-5)) {
    LayerNormParams p;
    p.gain = Tensor<Real>::param(Shape{d}, std::vector<Real>(static_cast<size_t>(d), Real(1)));
    p.bias = Tensor<Real>::param_zeros({d});
    p.epsilon = eps;
    return p;
  }

  std::vector<Tensor<Real>*> params() { return {&gain, &bias}; }
};

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, LayerNormParams<Real>& p) {
  return layer_norm(x, p.gain, p.bias, p.epsilon);
}

}  // namespace csipred::nn

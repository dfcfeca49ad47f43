#pragma once

// Benchmark models: an LSTM encoder with a one-shot linear head, a two-layer
// ReLU MLP on the flattened history, and an order-l multivariate AR model
// fitted by ordinary least squares.

#include <cstdint>
#include <string>
#include <vector>

#include "csipred/models/recurrent.hpp"
#include "csipred/nn/layers.hpp"
#include "csipred/nn/ops.hpp"

namespace csipred::models {

// ---------------------------------------------------------------------------
// LSTM: encode the history, emit all delta_train snapshots at once.

struct LstmConfig {
  int64_t input_dim = 64;  // 2M
  int64_t hidden_dim = 128;
  int64_t layers = 2;
  int64_t delta_train = 4;
};

template <typename Real>
struct LstmModel {
  LstmConfig cfg;
  LstmStack<Real> stack;
  nn::LinearParams<Real> head;  // hidden -> input_dim * delta_train

  static LstmModel create(const LstmConfig& cfg, Rng& rng) {
    LstmModel m;
    m.cfg = cfg;
    m.stack = LstmStack<Real>::create(cfg.input_dim, cfg.hidden_dim, cfg.layers, rng);
    m.head = nn::LinearParams<Real>::create(cfg.hidden_dim, cfg.input_dim * cfg.delta_train, rng);
    return m;
  }

  // One pass: [B, l, d] -> [B, delta_train, d].
  nn::Tensor<Real> forward_once(const nn::Tensor<Real>& known) {
    const int64_t l = known.dim(-2);
    const int64_t batch = known.numel() / (l * cfg.input_dim);
    auto states = stack.zero_state(batch);
    for (int64_t t = 0; t < l; ++t) {
      nn::Tensor<Real> x = nn::reshape(nn::slice(known, -2, t, 1), {batch, cfg.input_dim});
      states = stack.step(x, states);
    }
    nn::Tensor<Real> y = nn::linear_forward(states.back().hidden, head);
    return nn::reshape(y, {batch, cfg.delta_train, cfg.input_dim});
  }

  // delta < delta_train: keep the leading entries of the output vector.
  // delta > delta_train: re-apply the model on known + predicted.
  nn::Tensor<Real> predict(const nn::Tensor<Real>& known, int64_t delta) {
    nn::Tensor<Real> out = forward_once(known);
    if (delta == cfg.delta_train) return out;
    if (delta < cfg.delta_train) return nn::slice(out, -2, 0, delta);
    nn::Tensor<Real> extended = nn::concat(std::vector<nn::Tensor<Real>>{known, out}, -2);
    nn::Tensor<Real> rest = predict(extended, delta - cfg.delta_train);
    return nn::concat(std::vector<nn::Tensor<Real>>{out, rest}, -2);
  }

  nn::Tensor<Real> training_forward(const nn::Tensor<Real>& known, const nn::Tensor<Real>&) {
    return forward_once(known);
  }

  std::vector<nn::Tensor<Real>*> params() {
    std::vector<nn::Tensor<Real>*> out;
    for (auto* t : stack.params()) out.push_back(t);
    for (auto* t : head.params()) out.push_back(t);
    return out;
  }
};

// ---------------------------------------------------------------------------
// MLP on the flattened history; input length is fixed at training time.

struct MlpConfig {
  int64_t input_dim = 64;  // 2M
  int64_t l_train = 16;
  int64_t delta_train = 4;
  int64_t hidden = 512;
};

template <typename Real>
struct MlpModel {
  MlpConfig cfg;
  nn::LinearParams<Real> fc1;  // l_train*input_dim -> hidden
  nn::LinearParams<Real> fc2;  // hidden -> delta_train*input_dim

  static MlpModel create(const MlpConfig& cfg, Rng& rng) {
    MlpModel m;
    m.cfg = cfg;
    m.fc1 = nn::LinearParams<Real>::create(cfg.l_train * cfg.input_dim, cfg.hidden, rng);
    m.fc2 = nn::LinearParams<Real>::create(cfg.hidden, cfg.delta_train * cfg.input_dim, rng);
    return m;
  }

  nn::Tensor<Real> predict(const nn::Tensor<Real>& known, int64_t delta) {
    const int64_t l = known.dim(-2);
    if (l != cfg.l_train || delta != cfg.delta_train)
      throw ContractError("mlp predict: trained for l=" + std::to_string(cfg.l_train) +
                              ", delta=" + std::to_string(cfg.delta_train) + "; got l=" +
                              std::to_string(l) + ", delta=" + std::to_string(delta));
    const int64_t batch = known.numel() / (l * cfg.input_dim);
    nn::Tensor<Real> flat = nn::reshape(known, {batch, l * cfg.input_dim});
    nn::Tensor<Real> y = nn::linear_forward(nn::relu(nn::linear_forward(flat, fc1)), fc2);
    return nn::reshape(y, {batch, cfg.delta_train, cfg.input_dim});
  }

  nn::Tensor<Real> training_forward(const nn::Tensor<Real>& known, const nn::Tensor<Real>&) {
    return predict(known, cfg.delta_train);
  }

  std::vector<nn::Tensor<Real>*> params() {
    return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias};
  }
};

// ---------------------------------------------------------------------------
// Multivariate AR(order) via ordinary least squares, one row per valid step:
// [h(t-order), ..., h(t-1), 1] -> h(t). Solved per output coordinate through
// the normal equations in double precision; a tiny ridge is added if the
// factorization hits a non-positive pivot.

struct MarModel {
  int64_t order = 0;
  int64_t dim = 0;                // 2M
  std::vector<float> coeffs;      // [(order*dim + 1) x dim], last row = intercept
  bool ridge_used = false;

  std::vector<int64_t> coeff_shape() const { return {order * dim + 1, dim}; }

  // known: row-major [l, dim] with l == order. Recurses for delta steps.
  std::vector<float> predict_frame(const float* known, int64_t l, int64_t delta) const {
    if (l != order)
      throw ContractError("mar predict: model order " + std::to_string(order) +
                              " != history length " + std::to_string(l));
    std::vector<double> hist(known, known + l * dim);
    std::vector<float> out(static_cast<size_t>(delta * dim));
    const int64_t p = order * dim;
    for (int64_t s = 0; s < delta; ++s) {
      for (int64_t j = 0; j < dim; ++j) {
        double acc = coeffs[static_cast<size_t>(p * dim + j)];  // intercept
        for (int64_t r = 0; r < p; ++r)
          acc += hist[static_cast<size_t>(r)] * static_cast<double>(coeffs[static_cast<size_t>(r * dim + j)]);
        out[static_cast<size_t>(s * dim + j)] = static_cast<float>(acc);
      }
      // shift history left one snapshot, append the new prediction
      hist.erase(hist.begin(), hist.begin() + dim);
      for (int64_t j = 0; j < dim; ++j) hist.push_back(out[static_cast<size_t>(s * dim + j)]);
    }
    return out;
  }
};

namespace detail {

// Cholesky factorization of the SPD matrix a (n x n, lower). Returns false
// on a non-positive pivot.
inline bool cholesky_solve(std::vector<double>& a, std::vector<double>& rhs, int64_t n,
                           int64_t nrhs) {
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) {
      double s = a[static_cast<size_t>(i * n + j)];
      for (int64_t k = 0; k < j; ++k)
        s -= a[static_cast<size_t>(i * n + k)] * a[static_cast<size_t>(j * n + k)];
      if (i == j) {
        if (s <= 1e-14) return false;
        a[static_cast<size_t>(i * n + i)] = std::sqrt(s);
      } else {
        a[static_cast<size_t>(i * n + j)] = s / a[static_cast<size_t>(j * n + j)];
      }
    }
  }
  // forward then backward substitution, rhs is n x nrhs row-major
  for (int64_t c = 0; c < nrhs; ++c) {
    for (int64_t i = 0; i < n; ++i) {
      double s = rhs[static_cast<size_t>(i * nrhs + c)];
      for (int64_t k = 0; k < i; ++k) s -= a[static_cast<size_t>(i * n + k)] * rhs[static_cast<size_t>(k * nrhs + c)];
      rhs[static_cast<size_t>(i * nrhs + c)] = s / a[static_cast<size_t>(i * n + i)];
    }
    for (int64_t i = n - 1; i >= 0; --i) {
      double s = rhs[static_cast<size_t>(i * nrhs + c)];
      for (int64_t k = i + 1; k < n; ++k) s -= a[static_cast<size_t>(k * n + i)] * rhs[static_cast<size_t>(k * nrhs + c)];
      rhs[static_cast<size_t>(i * nrhs + c)] = s / a[static_cast<size_t>(i * n + i)];
    }
  }
  return true;
}

}  // namespace detail

// sequences: each row-major [n_slot, dim] with n_slot > order.
inline MarModel mar_fit(const std::vector<std::vector<float>>& sequences, int64_t n_slot,
                        int64_t dim, int64_t order) {
  if (order < 1) throw ContractError("mar_fit: order must be >= 1");
  int64_t n_rows = 0;
  for (const auto& s : sequences) {
    if (static_cast<int64_t>(s.size()) != n_slot * dim)
      throw ShapeError("mar_fit: sequence size mismatch");
    n_rows += n_slot - order;
  }
  if (n_rows < 1) throw ContractError("mar_fit: need at least one sequence with order+1 snapshots");

  const int64_t p = order * dim + 1;
  // Accumulate X^T X and X^T Y in double without materializing X.
  std::vector<double> xtx(static_cast<size_t>(p * p), 0.0);
  std::vector<double> xty(static_cast<size_t>(p * dim), 0.0);
  std::vector<double> row(static_cast<size_t>(p));
  for (const auto& s : sequences) {
    for (int64_t t = order; t < n_slot; ++t) {
      for (int64_t r = 0; r < order * dim; ++r)
        row[static_cast<size_t>(r)] = s[static_cast<size_t>((t - order) * dim + r)];
      row[static_cast<size_t>(p - 1)] = 1.0;
      const float* y = s.data() + t * dim;
      for (int64_t i = 0; i < p; ++i) {
        const double ri = row[static_cast<size_t>(i)];
        if (ri == 0.0) continue;
        double* xrow = xtx.data() + i * p;
        for (int64_t j = i; j < p; ++j) xrow[j] += ri * row[static_cast<size_t>(j)];
        double* yrow = xty.data() + i * dim;
        for (int64_t j = 0; j < dim; ++j) yrow[j] += ri * static_cast<double>(y[j]);
      }
    }
  }
  for (int64_t i = 0; i < p; ++i)
    for (int64_t j = 0; j < i; ++j) xtx[static_cast<size_t>(i * p + j)] = xtx[static_cast<size_t>(j * p + i)];

  MarModel m;
  m.order = order;
  m.dim = dim;
  std::vector<double> a = xtx;
  std::vector<double> sol = xty;
  if (!detail::cholesky_solve(a, sol, p, dim)) {
    // rank-deficient normal equations: retry with a tiny ridge
    a = xtx;
    sol = xty;
    for (int64_t i = 0; i < p; ++i) a[static_cast<size_t>(i * p + i)] += 1e-8;
    if (!detail::cholesky_solve(a, sol, p, dim))
      throw TrainingError("mar_fit: normal equations not solvable even with ridge");
    m.ridge_used = true;
  }
  // float32 is the storage precision across the toolkit
  m.coeffs.assign(sol.begin(), sol.end());
  return m;
}

}  // namespace csipred::models

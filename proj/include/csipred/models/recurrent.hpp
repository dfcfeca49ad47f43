#pragma once

// GRU and LSTM cells. Gates act on concat(input, hidden) through one matrix
// per gate; the GRU candidate applies the reset gate to the hidden state
// before the matmul. Every gate carries two bias vectors (input-side and
// hidden-side), which is the convention behind the reported parameter counts.

#include <cstdint>
#include <vector>

#include "csipred/nn/layers.hpp"
#include "csipred/nn/ops.hpp"
#include "csipred/nn/tensor.hpp"

namespace csipred::models {

using nn::Shape;
using nn::Tensor;

template <typename Real>
struct GateParams {
  Tensor<Real> weight;   // [hidden, input+hidden]
  Tensor<Real> bias_in;  // [hidden]
  Tensor<Real> bias_hid; // [hidden]

  static GateParams create(int64_t input_dim, int64_t hidden_dim, Rng& rng) {
    GateParams g;
    g.weight = Tensor<Real>::param_glorot({hidden_dim, input_dim + hidden_dim},
                                          input_dim + hidden_dim, hidden_dim, rng);
    g.bias_in = Tensor<Real>::param_zeros({hidden_dim});
    g.bias_hid = Tensor<Real>::param_zeros({hidden_dim});
    return g;
  }

  Tensor<Real> apply(const Tensor<Real>& x) {
    // the two bias vectors collapse to one cheap add before broadcasting
    return nn::add(nn::matmul(x, weight, /*trans_b=*/true), nn::add(bias_in, bias_hid));
  }

  std::vector<Tensor<Real>*> params() { return {&weight, &bias_in, &bias_hid}; }
  int64_t count() const { return weight.numel() + bias_in.numel() + bias_hid.numel(); }
};

// ---------------------------------------------------------------------------
// GRU

template <typename Real>
struct GruLayerParams {
  int64_t input_dim = 0;
  int64_t hidden_dim = 0;
  GateParams<Real> update;     // z
  GateParams<Real> reset;      // r
  GateParams<Real> candidate;  // u-tilde

  static GruLayerParams create(int64_t input_dim, int64_t hidden_dim, Rng& rng) {
    GruLayerParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.update = GateParams<Real>::create(input_dim, hidden_dim, rng);
    p.reset = GateParams<Real>::create(input_dim, hidden_dim, rng);
    p.candidate = GateParams<Real>::create(input_dim, hidden_dim, rng);
    return p;
  }

  std::vector<Tensor<Real>*> params() {
    std::vector<Tensor<Real>*> out;
    for (auto* g : {&update, &reset, &candidate})
      for (auto* t : g->params()) out.push_back(t);
    return out;
  }
  int64_t count() const { return update.count() + reset.count() + candidate.count(); }
};

//   z = sigmoid(W_z concat(x, u) + b_z)
//   r = sigmoid(W_r concat(x, u) + b_r)
//   u~ = tanh(W_u concat(x, r .* u) + b_u)
//   u' = (1 - z) .* u~ + z .* u
template <typename Real>
Tensor<Real> gru_cell(const Tensor<Real>& x, const Tensor<Real>& u_prev,
                      GruLayerParams<Real>& p) {
  if (x.dim(-1) != p.input_dim || u_prev.dim(-1) != p.hidden_dim)
    throw ShapeError("gru_cell: input/hidden dims do not match layer parameters");
  Tensor<Real> xu = nn::concat(std::vector<Tensor<Real>>{x, u_prev}, -1);
  Tensor<Real> z = nn::sigmoid(p.update.apply(xu));
  Tensor<Real> r = nn::sigmoid(p.reset.apply(xu));
  Tensor<Real> xru = nn::concat(std::vector<Tensor<Real>>{x, nn::mul(r, u_prev)}, -1);
  Tensor<Real> cand = nn::tanh_op(p.candidate.apply(xru));
  return nn::add(nn::mul(nn::affine(z, Real(-1), Real(1)), cand), nn::mul(z, u_prev));
}

template <typename Real>
struct GruStack {
  int64_t input_dim = 0;
  int64_t hidden_dim = 0;
  std::vector<GruLayerParams<Real>> layers;

  static GruStack create(int64_t input_dim, int64_t hidden_dim, int64_t n_layers, Rng& rng) {
    GruStack s;
    s.input_dim = input_dim;
    s.hidden_dim = hidden_dim;
    s.layers.reserve(static_cast<size_t>(n_layers));
    for (int64_t l = 0; l < n_layers; ++l)
      s.layers.push_back(GruLayerParams<Real>::create(l == 0 ? input_dim : hidden_dim, hidden_dim, rng));
    return s;
  }

  std::vector<Tensor<Real>> zero_state(int64_t batch) const {
    std::vector<Tensor<Real>> st;
    for (size_t l = 0; l < layers.size(); ++l) st.push_back(Tensor<Real>::zeros({batch, hidden_dim}));
    return st;
  }

  // Advances all layers one time step; returns the new per-layer hiddens.
  std::vector<Tensor<Real>> step(const Tensor<Real>& x, const std::vector<Tensor<Real>>& states) {
    std::vector<Tensor<Real>> next;
    next.reserve(layers.size());
    Tensor<Real> input = x;
    for (size_t l = 0; l < layers.size(); ++l) {
      Tensor<Real> u = gru_cell(input, states[l], layers[l]);
      next.push_back(u);
      input = u;
    }
    return next;
  }

  std::vector<Tensor<Real>*> params() {
    std::vector<Tensor<Real>*> out;
    for (auto& l : layers)
      for (auto* t : l.params()) out.push_back(t);
    return out;
  }
  int64_t count() const {
    int64_t c = 0;
    for (const auto& l : layers) c += l.count();
    return c;
  }
};

// ---------------------------------------------------------------------------
// LSTM

template <typename Real>
struct LstmLayerParams {
  int64_t input_dim = 0;
  int64_t hidden_dim = 0;
  GateParams<Real> input_gate;   // i
  GateParams<Real> forget_gate;  // f
  GateParams<Real> output_gate;  // o
  GateParams<Real> candidate;    // c-tilde

  static LstmLayerParams create(int64_t input_dim, int64_t hidden_dim, Rng& rng) {
    LstmLayerParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.input_gate = GateParams<Real>::create(input_dim, hidden_dim, rng);
    p.forget_gate = GateParams<Real>::create(input_dim, hidden_dim, rng);
    p.output_gate = GateParams<Real>::create(input_dim, hidden_dim, rng);
    p.candidate = GateParams<Real>::create(input_dim, hidden_dim, rng);
    return p;
  }

  std::vector<Tensor<Real>*> params() {
    std::vector<Tensor<Real>*> out;
    for (auto* g : {&input_gate, &forget_gate, &output_gate, &candidate})
      for (auto* t : g->params()) out.push_back(t);
    return out;
  }
  int64_t count() const {
    return input_gate.count() + forget_gate.count() + output_gate.count() + candidate.count();
  }
};

template <typename Real>
struct LstmState {
  Tensor<Real> hidden;
  Tensor<Real> cell;
};

//   i, f, o = sigmoid(W_* concat(x, u) + b_*)
//   c~ = tanh(W_c concat(x, u) + b_c)
//   c' = f .* c + i .* c~
//   u' = o .* tanh(c')
template <typename Real>
LstmState<Real> lstm_cell(const Tensor<Real>& x, const Tensor<Real>& u_prev,
                          const Tensor<Real>& c_prev, LstmLayerParams<Real>& p) {
  if (x.dim(-1) != p.input_dim || u_prev.dim(-1) != p.hidden_dim)
    throw ShapeError("lstm_cell: input/hidden dims do not match layer parameters");
  Tensor<Real> xu = nn::concat(std::vector<Tensor<Real>>{x, u_prev}, -1);
  Tensor<Real> i = nn::sigmoid(p.input_gate.apply(xu));
  Tensor<Real> f = nn::sigmoid(p.forget_gate.apply(xu));
  Tensor<Real> o = nn::sigmoid(p.output_gate.apply(xu));
  Tensor<Real> cand = nn::tanh_op(p.candidate.apply(xu));
  Tensor<Real> c = nn::add(nn::mul(f, c_prev), nn::mul(i, cand));
  return LstmState<Real>{nn::mul(o, nn::tanh_op(c)), c};
}

template <typename Real>
struct LstmStack {
  int64_t input_dim = 0;
  int64_t hidden_dim = 0;
  std::vector<LstmLayerParams<Real>> layers;

  static LstmStack create(int64_t input_dim, int64_t hidden_dim, int64_t n_layers, Rng& rng) {
    LstmStack s;
    s.input_dim = input_dim;
    s.hidden_dim = hidden_dim;
    for (int64_t l = 0; l < n_layers; ++l)
      s.layers.push_back(LstmLayerParams<Real>::create(l == 0 ? input_dim : hidden_dim, hidden_dim, rng));
    return s;
  }

  std::vector<LstmState<Real>> zero_state(int64_t batch) const {
    std::vector<LstmState<Real>> st;
    for (size_t l = 0; l < layers.size(); ++l)
      st.push_back(LstmState<Real>{Tensor<Real>::zeros({batch, hidden_dim}),
                                   Tensor<Real>::zeros({batch, hidden_dim})});
    return st;
  }

  std::vector<LstmState<Real>> step(const Tensor<Real>& x, const std::vector<LstmState<Real>>& states) {
    std::vector<LstmState<Real>> next;
    next.reserve(layers.size());
    Tensor<Real> input = x;
    for (size_t l = 0; l < layers.size(); ++l) {
      LstmState<Real> s = lstm_cell(input, states[l].hidden, states[l].cell, layers[l]);
      input = s.hidden;
      next.push_back(std::move(s));
    }
    return next;
  }

  std::vector<Tensor<Real>*> params() {
    std::vector<Tensor<Real>*> out;
    for (auto& l : layers)
      for (auto* t : l.params()) out.push_back(t);
    return out;
  }
  int64_t count() const {
    int64_t c = 0;
    for (const auto& l : layers) c += l.count();
    return c;
  }
};

}  // namespace csipred::models

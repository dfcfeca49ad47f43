#pragma once

// GRU encoder-decoder with attention over the encoder outputs. At each
// decoder step the current input and hidden state pick softmax weights over
// l_max logits (first l kept); weight index 0 pairs with the most recent
// encoder output when reversal is on, with the oldest when it is off. The
// weighted context and the input pass through a linear+ReLU combiner to form
// the GRU input; a linear head emits the next snapshot.

#include <cstdint>
#include <vector>

#include "csipred/models/recurrent.hpp"
#include "csipred/nn/layers.hpp"
#include "csipred/nn/ops.hpp"

namespace csipred::models {

struct Seq2SeqConfig {
  int64_t input_dim = 64;  // 2M
  int64_t hidden_dim = 128;
  int64_t layers = 2;
  int64_t l_max = 20;
  bool reversed_attention = true;  // the -R in Seq2Seq-attn-R
};

template <typename Real>
struct Seq2SeqEncoding {
  nn::Tensor<Real> outputs_attn;            // [B, l, hidden], attention order
  std::vector<nn::Tensor<Real>> final_state; // per-layer final hiddens
  int64_t length = 0;
};

template <typename Real>
struct Seq2SeqModel {
  Seq2SeqConfig cfg;
  GruStack<Real> encoder;                  // input_dim -> hidden
  GruStack<Real> decoder;                  // input_dim -> hidden (combined input)
  nn::LinearParams<Real> attn_linear;      // input_dim+hidden -> l_max
  nn::LinearParams<Real> combine_linear;   // input_dim+hidden -> input_dim
  nn::LinearParams<Real> out_linear;       // hidden -> input_dim

  static Seq2SeqModel create(const Seq2SeqConfig& cfg, Rng& rng) {
    Seq2SeqModel m;
    m.cfg = cfg;
    m.encoder = GruStack<Real>::create(cfg.input_dim, cfg.hidden_dim, cfg.layers, rng);
    m.decoder = GruStack<Real>::create(cfg.input_dim, cfg.hidden_dim, cfg.layers, rng);
    m.attn_linear = nn::LinearParams<Real>::create(cfg.input_dim + cfg.hidden_dim, cfg.l_max, rng);
    m.combine_linear = nn::LinearParams<Real>::create(cfg.input_dim + cfg.hidden_dim, cfg.input_dim, rng);
    m.out_linear = nn::LinearParams<Real>::create(cfg.hidden_dim, cfg.input_dim, rng);
    return m;
  }

  // Runs the encoder over [B, l, input_dim]. Top-layer hiddens are stacked
  // in attention order (reversed: index 0 = most recent).
  Seq2SeqEncoding<Real> encode(const nn::Tensor<Real>& seq) {
    const int64_t l = seq.dim(-2);
    if (l > cfg.l_max)
      throw ContractError("seq2seq encode: sequence length " + std::to_string(l) +
                              " exceeds l_max " + std::to_string(cfg.l_max));
    const int64_t batch = seq.numel() / (l * cfg.input_dim);
    std::vector<nn::Tensor<Real>> states = encoder.zero_state(batch);
    std::vector<nn::Tensor<Real>> tops;
    tops.reserve(static_cast<size_t>(l));
    for (int64_t t = 0; t < l; ++t) {
      nn::Tensor<Real> x = nn::reshape(nn::slice(seq, -2, t, 1), {batch, cfg.input_dim});
      states = encoder.step(x, states);
      tops.push_back(states.back());
    }
    Seq2SeqEncoding<Real> enc;
    enc.length = l;
    enc.final_state = states;
    if (cfg.reversed_attention) {
      std::vector<nn::Tensor<Real>> rev(tops.rbegin(), tops.rend());
      enc.outputs_attn = nn::stack(rev, 1);
    } else {
      enc.outputs_attn = nn::stack(tops, 1);
    }
    return enc;
  }

  // Attention step: softmax over the first l of l_max logits, then a
  // weighted sum of the (already ordered) encoder outputs.
  nn::Tensor<Real> attend(const nn::Tensor<Real>& x, const nn::Tensor<Real>& u_top,
                          const Seq2SeqEncoding<Real>& enc) {
    const int64_t batch = x.dim(0);
    nn::Tensor<Real> logits =
        nn::linear_forward(nn::concat(std::vector<nn::Tensor<Real>>{x, u_top}, -1), attn_linear);
    nn::Tensor<Real> weights = nn::softmax(nn::slice(logits, -1, 0, enc.length), -1);
    nn::Tensor<Real> w3 = nn::reshape(weights, {batch, 1, enc.length});
    nn::Tensor<Real> context = nn::matmul(w3, enc.outputs_attn);  // [B, 1, hidden]
    return nn::reshape(context, {batch, cfg.hidden_dim});
  }

  struct StepResult {
    nn::Tensor<Real> prediction;
    std::vector<nn::Tensor<Real>> states;
  };

  // One decoder step from input snapshot x and the current per-layer states.
  StepResult step(const nn::Tensor<Real>& x, const std::vector<nn::Tensor<Real>>& states,
                  const Seq2SeqEncoding<Real>& enc) {
    nn::Tensor<Real> context = attend(x, states.back(), enc);
    nn::Tensor<Real> combined = nn::relu(nn::linear_forward(
        nn::concat(std::vector<nn::Tensor<Real>>{x, context}, -1), combine_linear));
    std::vector<nn::Tensor<Real>> next = decoder.step(combined, states);
    return StepResult{nn::linear_forward(next.back(), out_linear), next};
  }

  // Free-running prediction; the first decoder input is the last known
  // snapshot, afterwards each emitted snapshot feeds the next step.
  nn::Tensor<Real> predict(const nn::Tensor<Real>& known, int64_t delta) {
    Seq2SeqEncoding<Real> enc = encode(known);
    const int64_t l = known.dim(-2);
    const int64_t batch = known.numel() / (l * cfg.input_dim);
    std::vector<nn::Tensor<Real>> states = enc.final_state;
    nn::Tensor<Real> x = nn::reshape(nn::slice(known, -2, l - 1, 1), {batch, cfg.input_dim});
    std::vector<nn::Tensor<Real>> outputs;
    for (int64_t t = 0; t < delta; ++t) {
      StepResult r = step(x, states, enc);
      outputs.push_back(r.prediction);
      states = std::move(r.states);
      x = r.prediction;
    }
    if (outputs.empty()) return nn::Tensor<Real>::zeros({batch, 0, cfg.input_dim});
    return nn::stack(outputs, 1);  // [B, delta, input_dim]
  }

  // Teacher-forced pass: decoder inputs are the last known snapshot followed
  // by the first delta-1 target snapshots. Training runs sequentially.
  nn::Tensor<Real> training_forward(const nn::Tensor<Real>& known, const nn::Tensor<Real>& dec_in) {
    Seq2SeqEncoding<Real> enc = encode(known);
    const int64_t delta = dec_in.dim(-2);
    const int64_t batch = dec_in.numel() / (delta * cfg.input_dim);
    std::vector<nn::Tensor<Real>> states = enc.final_state;
    std::vector<nn::Tensor<Real>> outputs;
    for (int64_t t = 0; t < delta; ++t) {
      nn::Tensor<Real> x = nn::reshape(nn::slice(dec_in, -2, t, 1), {batch, cfg.input_dim});
      StepResult r = step(x, states, enc);
      outputs.push_back(r.prediction);
      states = std::move(r.states);
    }
    return nn::stack(outputs, 1);
  }

  std::vector<nn::Tensor<Real>*> params() {
    std::vector<nn::Tensor<Real>*> out;
    for (auto* t : encoder.params()) out.push_back(t);
    for (auto* t : decoder.params()) out.push_back(t);
    for (auto* t : attn_linear.params()) out.push_back(t);
    for (auto* t : combine_linear.params()) out.push_back(t);
    for (auto* t : out_linear.params()) out.push_back(t);
    return out;
  }
};

}  // namespace csipred::models

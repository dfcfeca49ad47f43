#pragma once

// Tagged union over the six model families plus helpers to build them from a
// seed, dispatch prediction, and audit parameter counts block by block.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csipred/models/baselines.hpp"
#include "csipred/models/seq2seq.hpp"
#include "csipred/models/transformer.hpp"

namespace csipred::models {

enum class ModelFamily {
  transformer_rpe,
  transformer_pe,
  transformer_parallel,
  seq2seq_attn_r,
  seq2seq_attn,  // reversal flag off (ablation)
  lstm,
  mlp,
  mar,
};

inline const std::vector<std::pair<ModelFamily, std::string>>& family_names() {
  static const std::vector<std::pair<ModelFamily, std::string>> names = {
      {ModelFamily::transformer_rpe, "transformer-rpe"},
      {ModelFamily::transformer_pe, "transformer-pe"},
      {ModelFamily::transformer_parallel, "transformer-parallel"},
      {ModelFamily::seq2seq_attn_r, "seq2seq-attn-r"},
      {ModelFamily::seq2seq_attn, "seq2seq-attn"},
      {ModelFamily::lstm, "lstm"},
      {ModelFamily::mlp, "mlp"},
      {ModelFamily::mar, "mar"},
  };
  return names;
}

inline std::string family_name(ModelFamily f) {
  for (const auto& [fam, name] : family_names())
    if (fam == f) return name;
  return "unknown";
}

inline ModelFamily family_from_name(const std::string& s) {
  for (const auto& [fam, name] : family_names())
    if (name == s) return fam;
  throw ContractError("unknown model family '" + s + "'");
}

inline bool family_is_gradient_trained(ModelFamily f) { return f != ModelFamily::mar; }

// Published reference parameter totals (l=16, delta=4).
inline std::optional<int64_t> reference_param_count(ModelFamily f) {
  switch (f) {
    case ModelFamily::lstm:
      return 264448;
    case ModelFamily::seq2seq_attn_r:
    case ModelFamily::seq2seq_attn:
      return 370832;
    case ModelFamily::transformer_rpe:
    case ModelFamily::transformer_pe:
    case ModelFamily::transformer_parallel:
      return 178752;
    default:
      return std::nullopt;
  }
}

// All hyperparameter knobs, defaulted to the reference configuration.
struct ModelDims {
  int64_t input_dim = 64;  // 2M
  int64_t l_train = 16;
  int64_t delta_train = 4;
  TransformerConfig transformer{};
  Seq2SeqConfig seq2seq{};
  LstmConfig lstm{};
  MlpConfig mlp{};

  // Keeps the per-model dims consistent with the shared fields.
  void sync() {
    transformer.input_dim = input_dim;
    seq2seq.input_dim = input_dim;
    lstm.input_dim = input_dim;
    lstm.delta_train = delta_train;
    mlp.input_dim = input_dim;
    mlp.l_train = l_train;
    mlp.delta_train = delta_train;
  }

  // Small configuration for finite-difference gradient checks.
  static ModelDims tiny() {
    ModelDims d;
    d.input_dim = 6;
    d.l_train = 4;
    d.delta_train = 2;
    d.transformer.l_enc = 1;
    d.transformer.l_dec = 1;
    d.transformer.d_model = 8;
    d.transformer.heads = 2;
    d.transformer.d_attn = 4;
    d.transformer.d_mid = 4;
    d.transformer.mlp_hidden = 12;
    d.transformer.parallel_prefix = 3;
    d.seq2seq.hidden_dim = 10;
    d.seq2seq.l_max = 6;
    d.lstm.hidden_dim = 10;
    d.mlp.hidden = 16;
    d.sync();
    return d;
  }
};

struct ParamBlock {
  std::string name;
  int64_t count = 0;
};

struct ParamAudit {
  std::string family;
  std::vector<ParamBlock> blocks;
  int64_t total = 0;
  std::optional<int64_t> reference;  // complexity-table target when one exists

  int64_t delta_vs_reference() const { return reference ? total - *reference : 0; }
};

template <typename Real>
struct ModelBundle {
  ModelFamily family = ModelFamily::transformer_rpe;
  ModelDims dims;
  std::optional<TransformerModel<Real>> transformer;
  std::optional<Seq2SeqModel<Real>> seq2seq;
  std::optional<LstmModel<Real>> lstm;
  std::optional<MlpModel<Real>> mlp;
  std::optional<MarModel> mar;

  static ModelBundle create(ModelFamily fam, ModelDims dims, uint64_t seed) {
    dims.sync();
    ModelBundle b;
    b.family = fam;
    b.dims = dims;
    Rng rng = Rng(seed).derive(static_cast<uint64_t>(fam) + 101);
    switch (fam) {
      case ModelFamily::transformer_rpe:
      case ModelFamily::transformer_pe:
      case ModelFamily::transformer_parallel: {
        TransformerConfig cfg = dims.transformer;
        cfg.reversed_encoder_pe = fam == ModelFamily::transformer_rpe;
        cfg.parallel_decoding = fam == ModelFamily::transformer_parallel;
        b.transformer = TransformerModel<Real>::create(cfg, rng);
        break;
      }
      case ModelFamily::seq2seq_attn_r:
      case ModelFamily::seq2seq_attn: {
        Seq2SeqConfig cfg = dims.seq2seq;
        cfg.reversed_attention = fam == ModelFamily::seq2seq_attn_r;
        b.seq2seq = Seq2SeqModel<Real>::create(cfg, rng);
        break;
      }
      case ModelFamily::lstm:
        b.lstm = LstmModel<Real>::create(dims.lstm, rng);
        break;
      case ModelFamily::mlp:
        b.mlp = MlpModel<Real>::create(dims.mlp, rng);
        break;
      case ModelFamily::mar:
        b.mar = MarModel{};  // fitted later via mar_fit
        break;
    }
    return b;
  }

  nn::Tensor<Real> predict(const nn::Tensor<Real>& known, int64_t delta) {
    if (transformer) return transformer->predict(known, delta);
    if (seq2seq) return seq2seq->predict(known, delta);
    if (lstm) return lstm->predict(known, delta);
    if (mlp) return mlp->predict(known, delta);
    if (mar) {
      const int64_t l = known.dim(-2);
      const int64_t d = known.dim(-1);
      const int64_t batch = known.numel() / (l * d);
      std::vector<Real> out(static_cast<size_t>(batch * delta * d));
      std::vector<float> frame(static_cast<size_t>(l * d));
      for (int64_t i = 0; i < batch; ++i) {
        for (int64_t j = 0; j < l * d; ++j)
          frame[static_cast<size_t>(j)] = static_cast<float>(known.at(i * l * d + j));
        auto pred = mar->predict_frame(frame.data(), l, delta);
        for (int64_t j = 0; j < delta * d; ++j)
          out[static_cast<size_t>(i * delta * d + j)] = static_cast<Real>(pred[static_cast<size_t>(j)]);
      }
      return nn::Tensor<Real>::from_data({batch, delta, d}, std::move(out));
    }
    throw ContractError("predict: empty model bundle");
  }

  nn::Tensor<Real> training_forward(const nn::Tensor<Real>& known, const nn::Tensor<Real>& dec_in) {
    if (transformer) return transformer->training_forward(known, dec_in);
    if (seq2seq) return seq2seq->training_forward(known, dec_in);
    if (lstm) return lstm->training_forward(known, dec_in);
    if (mlp) return mlp->training_forward(known, dec_in);
    throw ContractError("training_forward: family has no gradient training");
  }

  std::vector<nn::Tensor<Real>*> params() {
    if (transformer) return transformer->params();
    if (seq2seq) return seq2seq->params();
    if (lstm) return lstm->params();
    if (mlp) return mlp->params();
    return {};
  }

  ParamAudit audit() const;
};

// ---------------------------------------------------------------------------
// Parameter audit

namespace detail {

inline int64_t mha_count(const TransformerConfig& c) {
  return c.heads * c.d_attn * c.d_model * 2 + c.heads * c.d_mid * c.d_model +
         c.d_model * c.heads * c.d_mid;
}

}  // namespace detail

template <typename Real>
ParamAudit ModelBundle<Real>::audit() const {
  ParamAudit a;
  a.family = family_name(family);
  a.reference = reference_param_count(family);
  auto push = [&a](const std::string& name, int64_t count) {
    a.blocks.push_back({name, count});
    a.total += count;
  };
  if (transformer) {
    const auto& c = transformer->cfg;
    const int64_t lin_embed = c.d_model * c.input_dim + c.d_model;
    const int64_t ln = 2 * c.d_model;
    const int64_t mlp_blk = c.mlp_hidden * c.d_model + c.mlp_hidden + c.d_model * c.mlp_hidden + c.d_model;
    push("encoder.embed", lin_embed);
    push("decoder.embed", lin_embed);
    for (int64_t l = 0; l < c.l_enc; ++l) {
      const std::string p = "encoder.block" + std::to_string(l) + ".";
      push(p + "layer_norms", 2 * ln);
      push(p + "self_attention", detail::mha_count(c));
      push(p + "mlp", mlp_blk);
    }
    for (int64_t l = 0; l < c.l_dec; ++l) {
      const std::string p = "decoder.block" + std::to_string(l) + ".";
      push(p + "layer_norms", 3 * ln);
      push(p + "self_attention", detail::mha_count(c));
      push(p + "cross_attention", detail::mha_count(c));
      push(p + "mlp", mlp_blk);
    }
    push("encoder.final_norm", ln);
    push("decoder.final_norm", ln);
    push("output_head", c.input_dim * c.d_model + c.input_dim);
  } else if (seq2seq) {
    const auto& c = seq2seq->cfg;
    auto gru_layer = [&](int64_t in) { return 3 * (c.hidden_dim * (in + c.hidden_dim) + 2 * c.hidden_dim); };
    for (int64_t l = 0; l < c.layers; ++l)
      push("encoder.gru" + std::to_string(l), gru_layer(l == 0 ? c.input_dim : c.hidden_dim));
    for (int64_t l = 0; l < c.layers; ++l)
      push("decoder.gru" + std::to_string(l), gru_layer(l == 0 ? c.input_dim : c.hidden_dim));
    push("decoder.attention_linear", c.l_max * (c.input_dim + c.hidden_dim) + c.l_max);
    push("decoder.combine_linear", c.input_dim * (c.input_dim + c.hidden_dim) + c.input_dim);
    push("decoder.output_linear", c.input_dim * c.hidden_dim + c.input_dim);
  } else if (lstm) {
    const auto& c = lstm->cfg;
    auto lstm_layer = [&](int64_t in) { return 4 * (c.hidden_dim * (in + c.hidden_dim) + 2 * c.hidden_dim); };
    for (int64_t l = 0; l < c.layers; ++l)
      push("lstm" + std::to_string(l), lstm_layer(l == 0 ? c.input_dim : c.hidden_dim));
    push("head", c.input_dim * c.delta_train * c.hidden_dim + c.input_dim * c.delta_train);
  } else if (mlp) {
    const auto& c = mlp->cfg;
    push("fc1", c.hidden * c.l_train * c.input_dim + c.hidden);
    push("fc2", c.delta_train * c.input_dim * c.hidden + c.delta_train * c.input_dim);
  } else if (mar) {
    push("coefficients", static_cast<int64_t>(mar->coeffs.size()));
  }
  return a;
}

// Cross-check: audit totals must equal the live parameter tensors.
template <typename Real>
int64_t count_parameters(ModelBundle<Real>& bundle) {
  if (bundle.mar) return static_cast<int64_t>(bundle.mar->coeffs.size());
  int64_t total = 0;
  for (const auto* p : bundle.params()) total += p->numel();
  return total;
}

}  // namespace csipred::models

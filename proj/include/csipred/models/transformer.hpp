#pragma once

// Encoder-decoder transformer for multi-step sequence prediction. Pre-norm
// residual blocks, a final layer norm after encoder and decoder stacks, and
// a linear output head. The encoder adds either a reversed or a standard
// positional table; the decoder always uses the standard one. Prediction is
// sequential one-by-one, except for the parallel variant which feeds the
// last `parallel_prefix` known snapshots plus all-zero slots and reads every
// output in a single pass.

#include <cstdint>
#include <string>
#include <vector>

#include "csipred/attn/attention.hpp"
#include "csipred/attn/positional.hpp"
#include "csipred/nn/layers.hpp"
#include "csipred/nn/ops.hpp"

namespace csipred::models {

struct TransformerConfig {
  int64_t input_dim = 64;  // 2M
  int64_t l_enc = 2;
  int64_t l_dec = 2;
  int64_t d_model = 64;
  int64_t heads = 4;
  int64_t d_attn = 16;
  int64_t d_mid = 16;
  int64_t mlp_hidden = 128;
  bool reversed_encoder_pe = true;   // RPE vs standard PE in the encoder
  bool parallel_decoding = false;    // Transformer-Parallel scheme
  int64_t parallel_prefix = 8;       // known snapshots fed to the parallel decoder
};

template <typename Real>
struct TransformerBlockMlp {
  nn::LinearParams<Real> fc1;
  nn::LinearParams<Real> fc2;

  static TransformerBlockMlp create(int64_t d_model, int64_t hidden, Rng& rng) {
    TransformerBlockMlp m;
    m.fc1 = nn::LinearParams<Real>::create(d_model, hidden, rng);
    m.fc2 = nn::LinearParams<Real>::create(hidden, d_model, rng);
    return m;
  }

  nn::Tensor<Real> forward(const nn::Tensor<Real>& x) {
    return nn::linear_forward(nn::gelu(nn::linear_forward(x, fc1)), fc2);
  }

  std::vector<nn::Tensor<Real>*> params() {
    return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias};
  }
};

template <typename Real>
struct TransformerEncoderBlock {
  nn::LayerNormParams<Real> ln_attn;
  attn::MhaParams<Real> self_attn;
  nn::LayerNormParams<Real> ln_mlp;
  TransformerBlockMlp<Real> mlp;

  static TransformerEncoderBlock create(const TransformerConfig& c, Rng& rng) {
    TransformerEncoderBlock b;
    b.ln_attn = nn::LayerNormParams<Real>::create(c.d_model);
    b.self_attn = attn::MhaParams<Real>::create(c.heads, c.d_attn, c.d_mid, c.d_model,
                                                c.d_model, c.d_model, rng);
    b.ln_mlp = nn::LayerNormParams<Real>::create(c.d_model);
    b.mlp = TransformerBlockMlp<Real>::create(c.d_model, c.mlp_hidden, rng);
    return b;
  }

  nn::Tensor<Real> forward(const nn::Tensor<Real>& x) {
    nn::Tensor<Real> normed = nn::layer_norm(x, ln_attn);
    nn::Tensor<Real> h = nn::add(x, attn::multi_head_attention(normed, normed, nullptr, self_attn));
    return nn::add(h, mlp.forward(nn::layer_norm(h, ln_mlp)));
  }

  std::vector<nn::Tensor<Real>*> params() {
    std::vector<nn::Tensor<Real>*> out;
    for (auto* t : ln_attn.params()) out.push_back(t);
    for (auto* t : self_attn.params()) out.push_back(t);
    for (auto* t : ln_mlp.params()) out.push_back(t);
    for (auto* t : mlp.params()) out.push_back(t);
    return out;
  }
};

template <typename Real>
struct TransformerDecoderBlock {
  nn::LayerNormParams<Real> ln_self;
  attn::MhaParams<Real> self_attn;
  nn::LayerNormParams<Real> ln_cross;
  attn::MhaParams<Real> cross_attn;
  nn::LayerNormParams<Real> ln_mlp;
  TransformerBlockMlp<Real> mlp;

  static TransformerDecoderBlock create(const TransformerConfig& c, Rng& rng) {
    TransformerDecoderBlock b;
    b.ln_self = nn::LayerNormParams<Real>::create(c.d_model);
    b.self_attn = attn::MhaParams<Real>::create(c.heads, c.d_attn, c.d_mid, c.d_model,
                                                c.d_model, c.d_model, rng);
    b.ln_cross = nn::LayerNormParams<Real>::create(c.d_model);
    b.cross_attn = attn::MhaParams<Real>::create(c.heads, c.d_attn, c.d_mid, c.d_model,
                                                 c.d_model, c.d_model, rng);
    b.ln_mlp = nn::LayerNormParams<Real>::create(c.d_model);
    b.mlp = TransformerBlockMlp<Real>::create(c.d_model, c.mlp_hidden, rng);
    return b;
  }

  nn::Tensor<Real> forward(const nn::Tensor<Real>& x, const nn::Tensor<Real>& enc_out,
                           const attn::AttentionMask& mask) {
    nn::Tensor<Real> n1 = nn::layer_norm(x, ln_self);
    nn::Tensor<Real> h = nn::add(x, attn::multi_head_attention(n1, n1, &mask, self_attn));
    nn::Tensor<Real> n2 = nn::layer_norm(h, ln_cross);
    h = nn::add(h, attn::multi_head_attention(n2, enc_out, nullptr, cross_attn));
    return nn::add(h, mlp.forward(nn::layer_norm(h, ln_mlp)));
  }

  std::vector<nn::Tensor<Real>*> params() {
    std::vector<nn::Tensor<Real>*> out;
    for (auto* t : ln_self.params()) out.push_back(t);
    for (auto* t : self_attn.params()) out.push_back(t);
    for (auto* t : ln_cross.params()) out.push_back(t);
    for (auto* t : cross_attn.params()) out.push_back(t);
    for (auto* t : ln_mlp.params()) out.push_back(t);
    for (auto* t : mlp.params()) out.push_back(t);
    return out;
  }
};

template <typename Real>
struct TransformerModel {
  TransformerConfig cfg;
  nn::LinearParams<Real> enc_embed;   // input_dim -> d_model
  nn::LinearParams<Real> dec_embed;   // input_dim -> d_model
  std::vector<TransformerEncoderBlock<Real>> encoder;
  std::vector<TransformerDecoderBlock<Real>> decoder;
  nn::LayerNormParams<Real> enc_final;
  nn::LayerNormParams<Real> dec_final;
  nn::LinearParams<Real> head;        // d_model -> input_dim

  static TransformerModel create(const TransformerConfig& cfg, Rng& rng) {
    TransformerModel m;
    m.cfg = cfg;
    m.enc_embed = nn::LinearParams<Real>::create(cfg.input_dim, cfg.d_model, rng);
    m.dec_embed = nn::LinearParams<Real>::create(cfg.input_dim, cfg.d_model, rng);
    for (int64_t l = 0; l < cfg.l_enc; ++l)
      m.encoder.push_back(TransformerEncoderBlock<Real>::create(cfg, rng));
    for (int64_t l = 0; l < cfg.l_dec; ++l)
      m.decoder.push_back(TransformerDecoderBlock<Real>::create(cfg, rng));
    m.enc_final = nn::LayerNormParams<Real>::create(cfg.d_model);
    m.dec_final = nn::LayerNormParams<Real>::create(cfg.d_model);
    m.head = nn::LinearParams<Real>::create(cfg.d_model, cfg.input_dim, rng);
    return m;
  }

  // The constant positional bias the encoder adds for a given length.
  attn::PosEncoding<Real> encoder_positional_bias(int64_t len) const {
    return cfg.reversed_encoder_pe ? attn::reverse_positional_encoding<Real>(len, cfg.d_model)
                                   : attn::positional_encoding<Real>(len, cfg.d_model);
  }

  // seq: [B, l, input_dim] -> [B, l, d_model]
  nn::Tensor<Real> encode(const nn::Tensor<Real>& seq) {
    const int64_t len = seq.dim(-2);
    nn::Tensor<Real> x = nn::linear_forward(seq, enc_embed);
    x = nn::add(x, encoder_positional_bias(len).table);
    for (auto& block : encoder) x = block.forward(x);
    return nn::layer_norm(x, enc_final);
  }

  // dec_in: [B, t, input_dim]; row 0 is the last known snapshot. All t
  // predictions come out of one masked pass.
  nn::Tensor<Real> decode_teacher_forced(const nn::Tensor<Real>& enc_out,
                                         const nn::Tensor<Real>& dec_in) {
    const int64_t t = dec_in.dim(-2);
    nn::Tensor<Real> x = nn::linear_forward(dec_in, dec_embed);
    x = nn::add(x, attn::positional_encoding<Real>(t, cfg.d_model).table);
    const attn::AttentionMask mask = attn::causal_mask(t);
    for (auto& block : decoder) x = block.forward(x, enc_out, mask);
    return nn::linear_forward(nn::layer_norm(x, dec_final), head);
  }

  // Sequential one-by-one prediction: each emitted snapshot becomes the next
  // decoder input. known: [B, l, input_dim] -> [B, delta, input_dim].
  nn::Tensor<Real> predict(const nn::Tensor<Real>& known, int64_t delta) {
    if (cfg.parallel_decoding) return parallel_predict(known, delta);
    const int64_t l = known.dim(-2);
    nn::Tensor<Real> enc_out = encode(known);
    if (delta == 0) {
      nn::Shape s = known.shape();
      s[s.size() - 2] = 0;
      return nn::Tensor<Real>::zeros(s);
    }
    nn::Tensor<Real> dec_in = nn::slice(known, -2, l - 1, 1);
    std::vector<nn::Tensor<Real>> outputs;
    for (int64_t step = 0; step < delta; ++step) {
      nn::Tensor<Real> out = decode_teacher_forced(enc_out, dec_in);
      nn::Tensor<Real> next = nn::slice(out, -2, step, 1);
      outputs.push_back(next);
      if (step + 1 < delta)
        dec_in = nn::concat(std::vector<nn::Tensor<Real>>{dec_in, next}, -2);
    }
    return outputs.size() == 1 ? outputs[0] : nn::concat(outputs, -2);
  }

  // Parallel scheme: decoder input is the last `parallel_prefix` known
  // snapshots followed by delta all-zero slots; outputs are read from the
  // trailing slots in one pass. The causal mask covers the whole input.
  nn::Tensor<Real> parallel_predict(const nn::Tensor<Real>& known, int64_t delta) {
    const int64_t l = known.dim(-2);
    if (l < cfg.parallel_prefix)
      throw ContractError("parallel_predict: need at least " +
                              std::to_string(cfg.parallel_prefix) + " known snapshots, got " +
                              std::to_string(l));
    nn::Tensor<Real> enc_out = encode(known);
    nn::Tensor<Real> prefix = nn::slice(known, -2, l - cfg.parallel_prefix, cfg.parallel_prefix);
    nn::Shape zshape = known.shape();
    zshape[zshape.size() - 2] = delta;
    nn::Tensor<Real> zeros = nn::Tensor<Real>::zeros(zshape);
    nn::Tensor<Real> dec_in = nn::concat(std::vector<nn::Tensor<Real>>{prefix, zeros}, -2);
    nn::Tensor<Real> out = decode_teacher_forced(enc_out, dec_in);
    return nn::slice(out, -2, cfg.parallel_prefix, delta);
  }

  // Teacher-forced training pass. known: [B, l, d]; dec_in: [B, delta, d]
  // whose row 0 is the last known snapshot followed by the noisy targets
  // shifted by one. The parallel variant ignores dec_in and uses zero slots.
  nn::Tensor<Real> training_forward(const nn::Tensor<Real>& known, const nn::Tensor<Real>& dec_in) {
    if (cfg.parallel_decoding) return parallel_predict(known, dec_in.dim(-2));
    return decode_teacher_forced(encode(known), dec_in);
  }

  std::vector<nn::Tensor<Real>*> params() {
    std::vector<nn::Tensor<Real>*> out;
    for (auto* t : enc_embed.params()) out.push_back(t);
    for (auto* t : dec_embed.params()) out.push_back(t);
    for (auto& b : encoder)
      for (auto* t : b.params()) out.push_back(t);
    for (auto& b : decoder)
      for (auto* t : b.params()) out.push_back(t);
    for (auto* t : enc_final.params()) out.push_back(t);
    for (auto* t : dec_final.params()) out.push_back(t);
    for (auto* t : head.params()) out.push_back(t);
    return out;
  }
};

}  // namespace csipred::models

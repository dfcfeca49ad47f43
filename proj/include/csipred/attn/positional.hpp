#pragma once

// Sinusoidal positional encoding and its reversed variant. The table is a
// constant bias, never a parameter. Reversal flips the row order, so row 0
// of a reversed table always carries the encoding of "most recent" no matter
// how long the sequence is.

#include <cmath>
#include <cstdint>

#include "csipred/nn/tensor.hpp"

namespace csipred::attn {

template <typename Real>
struct PosEncoding {
  int64_t seq_len = 0;
  int64_t d_model = 0;
  bool reversed = false;
  nn::Tensor<Real> table;  // [seq_len, d_model], entries in [-1, 1]

  Real at(int64_t pos, int64_t dim) const { return table.at(pos * d_model + dim); }
};

// table[j][2i]   = sin(j / 10000^(2i/d_model))
// table[j][2i+1] = cos(j / 10000^(2i/d_model)),  i in [0, d_model/2).
template <typename Real>
PosEncoding<Real> positional_encoding(int64_t seq_len, int64_t d_model) {
  if (seq_len < 1) throw ContractError("positional_encoding: seq_len must be >= 1");
  if (d_model < 2 || d_model % 2 != 0)
    throw ContractError("positional_encoding: d_model must be even, got " + std::to_string(d_model));
  std::vector<Real> values(static_cast<size_t>(seq_len * d_model));
  for (int64_t j = 0; j < seq_len; ++j) {
    for (int64_t i = 0; i < d_model / 2; ++i) {
      const double angle = static_cast<double>(j) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      values[static_cast<size_t>(j * d_model + 2 * i)] = static_cast<Real>(std::sin(angle));
      values[static_cast<size_t>(j * d_model + 2 * i + 1)] = static_cast<Real>(std::cos(angle));
    }
  }
  PosEncoding<Real> pe;
  pe.seq_len = seq_len;
  pe.d_model = d_model;
  pe.reversed = false;
  pe.table = nn::Tensor<Real>::from_data({seq_len, d_model}, std::move(values));
  return pe;
}

// Row j of the reversed table equals row (seq_len-1-j) of the forward table.
template <typename Real>
PosEncoding<Real> reverse_positional_encoding(int64_t seq_len, int64_t d_model) {
  PosEncoding<Real> fwd = positional_encoding<Real>(seq_len, d_model);
  std::vector<Real> values(static_cast<size_t>(seq_len * d_model));
  const auto& src = fwd.table.values();
  for (int64_t j = 0; j < seq_len; ++j) {
    const int64_t rj = seq_len - 1 - j;
    std::copy(src.begin() + rj * d_model, src.begin() + (rj + 1) * d_model,
              values.begin() + j * d_model);
  }
  PosEncoding<Real> rpe;
  rpe.seq_len = seq_len;
  rpe.d_model = d_model;
  rpe.reversed = true;
  rpe.table = nn::Tensor<Real>::from_data({seq_len, d_model}, std::move(values));
  return rpe;
}

}  // namespace csipred::attn

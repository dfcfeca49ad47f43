#pragma once

// NMSE = mean over samples of ||H - Hhat||_F^2 / ||H||_F^2.

#include <cmath>
#include <cstdint>
#include <span>

#include "csipred/nn/errors.hpp"

namespace csipred::train {

struct NmseAccumulator {
  double sum = 0.0;
  int64_t count = 0;
  int64_t skipped = 0;  // zero-norm references (cannot occur post-normalization)

  void add(std::span<const float> reference, std::span<const float> predicted) {
    if (reference.size() != predicted.size())
      throw ShapeError("nmse: reference and prediction sizes differ");
    double err = 0.0, ref = 0.0;
    for (size_t i = 0; i < reference.size(); ++i) {
      const double d = static_cast<double>(reference[i]) - static_cast<double>(predicted[i]);
      err += d * d;
      ref += static_cast<double>(reference[i]) * static_cast<double>(reference[i]);
    }
    if (ref == 0.0) {
      ++skipped;
      return;
    }
    sum += err / ref;
    ++count;
  }

  double value() const {
    if (count == 0) throw ContractError("nmse: no valid samples");
    return sum / static_cast<double>(count);
  }
};

inline double nmse(std::span<const float> reference, std::span<const float> predicted) {
  NmseAccumulator acc;
  acc.add(reference, predicted);
  return acc.value();
}

}  // namespace csipred::train

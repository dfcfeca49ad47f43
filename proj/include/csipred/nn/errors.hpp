#pragma once

#include <stdexcept>
#include <string>

namespace csipred {

// Shape/dimension mismatch between tensors or parameters.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Violated API contract (bad argument, illegal state).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Runtime failure surfaced from a training loop (divergence, NaN gradients).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace csipred

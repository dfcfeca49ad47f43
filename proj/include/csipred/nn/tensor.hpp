#pragma once

// Dense row-major tensor with reverse-mode autodiff over a fixed op set.
// A Tensor is a shared handle to a graph node; ops (ops.hpp) link nodes via
// parent pointers and a backward closure. Gradients flow on demand from a
// scalar loss via Tensor::backward(). There is no graph compiler and no
// double-backward; the op set is exactly what the models here need.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "csipred/nn/errors.hpp"
#include "csipred/rng.hpp"

namespace csipred::nn {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Forward/backward recording switch (thread-local). Evaluation paths wrap
// themselves in NoGradGuard so no graph is built.
namespace detail {
inline thread_local bool g_grad_enabled = true;
}
inline bool grad_enabled() { return detail::g_grad_enabled; }

class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
  ~NoGradGuard() { detail::g_grad_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename Real>
struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // allocated on first use during backward
  bool requires_grad = false;  // leaf parameter flag
  bool needs_grad = false;     // this node participates in some gradient path
  bool backward_done = false;  // set on the root once backward has run
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Real(0));
  }
};

template <typename Real>
class Tensor {
 public:
  using Real_t = Real;

  Tensor() : n_(std::make_shared<Node<Real>>()) {}

  static Tensor zeros(Shape shape) { return filled(std::move(shape), Real(0)); }

  static Tensor filled(Shape shape, Real v) {
    Tensor t;
    const int64_t n = shape_numel(shape);
    t.n_->shape = std::move(shape);
    t.n_->value.assign(static_cast<size_t>(n), v);
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<Real> data) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw ShapeError("from_data: shape " + shape_str(shape) + " does not match " +
                       std::to_string(data.size()) + " values");
    Tensor t;
    t.n_->shape = std::move(shape);
    t.n_->value = std::move(data);
    return t;
  }

  // Leaf parameter, tracked by backward().
  static Tensor param(Shape shape, std::vector<Real> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.n_->requires_grad = true;
    t.n_->needs_grad = true;
    return t;
  }

  static Tensor param_zeros(Shape shape) {
    Tensor t = zeros(std::move(shape));
    t.n_->requires_grad = true;
    t.n_->needs_grad = true;
    return t;
  }

  // Uniform Glorot initialization.
  static Tensor param_glorot(Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    const int64_t n = shape_numel(shape);
    std::vector<Real> data(static_cast<size_t>(n));
    for (auto& v : data) v = static_cast<Real>(rng.uniform(-a, a));
    return param(std::move(shape), std::move(data));
  }

  const Shape& shape() const { return n_->shape; }
  size_t rank() const { return n_->shape.size(); }
  int64_t dim(int i) const {
    const int r = static_cast<int>(rank());
    return n_->shape[static_cast<size_t>(i < 0 ? r + i : i)];
  }
  int64_t numel() const { return n_->numel(); }

  const std::vector<Real>& values() const { return n_->value; }
  std::vector<Real>& mutable_values() { return n_->value; }
  Real at(int64_t flat) const { return n_->value[static_cast<size_t>(flat)]; }

  bool requires_grad() const { return n_->requires_grad; }
  bool needs_grad() const { return n_->needs_grad; }

  // Gradient accumulated by the last backward(); empty if this tensor was
  // not on the loss path (reads as all-zero).
  const std::vector<Real>& grad() const { return n_->grad; }
  Real grad_at(int64_t flat) const {
    return n_->grad.empty() ? Real(0) : n_->grad[static_cast<size_t>(flat)];
  }
  void zero_grad() { n_->grad.clear(); }

  Real item() const {
    if (numel() != 1) throw ContractError("item(): tensor is not scalar, shape " + shape_str(shape()));
    return n_->value[0];
  }

  // Same values, no graph participation.
  Tensor detach() const {
    Tensor t;
    t.n_->shape = n_->shape;
    t.n_->value = n_->value;
    return t;
  }

  bool all_finite() const {
    for (Real v : n_->value)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Reverse-mode sweep from a scalar loss. Gradients accumulate into the
  // .grad() of every reachable leaf parameter. A second sweep from the same
  // root is rejected; losses that touch no parameter are a no-op.
  void backward() const {
    if (numel() != 1) throw ContractError("backward(): loss must be scalar, got " + shape_str(shape()));
    if (n_->backward_done) throw ContractError("backward(): already run for this loss");
    n_->backward_done = true;
    if (!n_->needs_grad) return;

    std::vector<Node<Real>*> order;
    topo_sort(n_.get(), order);

    n_->ensure_grad();
    n_->grad[0] = Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<Real>* node = *it;
      if (!node->backward_fn) continue;
      for (auto& p : node->parents)
        if (p->needs_grad) p->ensure_grad();
      node->backward_fn(*node);
    }
  }

  std::shared_ptr<Node<Real>> node() const { return n_; }

  // Builds a graph-linked result node. Used by the op layer only.
  static Tensor make_op(Shape shape, std::vector<Real> value,
                        std::vector<Tensor> inputs,
                        std::function<void(Node<Real>&)> backward_fn) {
    Tensor t = from_data(std::move(shape), std::move(value));
    bool needs = false;
    if (grad_enabled()) {
      for (const auto& in : inputs) needs = needs || in.n_->needs_grad;
    }
    if (needs) {
      t.n_->needs_grad = true;
      t.n_->parents.reserve(inputs.size());
      for (auto& in : inputs) t.n_->parents.push_back(in.n_);
      t.n_->backward_fn = std::move(backward_fn);
    }
    return t;
  }

 private:
  static void topo_sort(Node<Real>* root, std::vector<Node<Real>*>& order) {
    // Iterative post-order DFS over the needs_grad subgraph.
    std::unordered_set<Node<Real>*> visited;
    std::vector<std::pair<Node<Real>*, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node<Real>* p = node->parents[idx++].get();
        if (p->needs_grad && !visited.count(p)) {
          visited.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node<Real>> n_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace csipred::nn

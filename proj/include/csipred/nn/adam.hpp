#pragma once

// Adam with standard bias correction. The update is a pure function of
// (params, grads, state): identical inputs produce bitwise identical outputs
// under a fixed kernel ISA.

#include <cmath>
#include <string>
#include <vector>

#include "csipred/kernels/kernels.hpp"
#include "csipred/nn/errors.hpp"
#include "csipred/nn/tensor.hpp"

namespace csipred::nn {

template <typename Real>
struct AdamState {
  Real lr = Real(1e-3);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);
  int64_t step_count = 0;
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;

  static AdamState create(const std::vector<Tensor<Real>*>& params, Real lr = Real(1e-3)) {
    AdamState st;
    st.lr = lr;
    st.first_moment.reserve(params.size());
    st.second_moment.reserve(params.size());
    for (const auto* p : params) {
      st.first_moment.emplace_back(static_cast<size_t>(p->numel()), Real(0));
      st.second_moment.emplace_back(static_cast<size_t>(p->numel()), Real(0));
    }
    return st;
  }
};

// One optimizer step over all parameters. Gradients are read from each
// parameter's .grad(); an empty grad is treated as all-zero. NaN gradients
// abort with a TrainingError naming the offending parameter index.
template <typename Real>
void adam_step(const std::vector<Tensor<Real>*>& params, AdamState<Real>& state) {
  if (params.size() != state.first_moment.size())
    throw ContractError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                        " params, got " + std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i]->grad();
    for (Real v : g)
      if (std::isnan(static_cast<double>(v)))
        throw TrainingError("adam_step: NaN gradient in parameter " + std::to_string(i));
  }
  state.step_count += 1;
  const Real c1 = Real(1) / (Real(1) - static_cast<Real>(std::pow(static_cast<double>(state.beta1),
                                                                  static_cast<double>(state.step_count))));
  const Real c2 = Real(1) / (Real(1) - static_cast<Real>(std::pow(static_cast<double>(state.beta2),
                                                                  static_cast<double>(state.step_count))));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<Real>* p = params[i];
    const int64_t n = p->numel();
    if (static_cast<int64_t>(state.first_moment[i].size()) != n)
      throw ShapeError("adam_step: accumulator shape mismatch for parameter " + std::to_string(i));
    Real* m = state.first_moment[i].data();
    Real* v = state.second_moment[i].data();
    Real* pv = p->mutable_values().data();
    if (p->grad().empty()) {
      // Parameter off the loss path this step: moments still decay.
      for (int64_t j = 0; j < n; ++j) {
        m[j] *= state.beta1;
        v[j] *= state.beta2;
        pv[j] -= state.lr * (m[j] * c1) / (std::sqrt(v[j] * c2) + state.eps);
      }
    } else {
      kernels::adam_update<Real>(n, pv, p->grad().data(), m, v, state.lr, state.beta1,
                                 state.beta2, state.eps, c1, c2);
    }
  }
}

}  // namespace csipred::nn

#pragma once

// Central finite-difference gradient checker. Meant to run on the double
// instantiation of a model; float roundoff drowns the h^2 truncation term.

#include <cstdint>
#include <functional>
#include <vector>

#include "csipred/nn/tensor.hpp"
#include "csipred/rng.hpp"

namespace csipred::nn {

template <typename Real>
struct GradCheckReport {
  Real max_rel_err = 0;
  int64_t probes = 0;
  size_t worst_param = 0;
  int64_t worst_index = 0;
};

// Compares tape gradients of loss_fn() against (f(x+h)-f(x-h))/2h on
// `probe_count` randomly sampled parameter coordinates. Relative error uses
// denominator max(|analytic|, |numeric|, 1e-8).
template <typename Real>
GradCheckReport<Real> grad_check(const std::function<Tensor<Real>()>& loss_fn,
                                 const std::vector<Tensor<Real>*>& params,
                                 int64_t probe_count, Rng& rng, Real step = Real(1e-5)) {
  for (auto* p : params) p->zero_grad();
  Tensor<Real> loss = loss_fn();
  loss.backward();
  std::vector<std::vector<Real>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) {
    analytic.emplace_back(p->grad().empty() ? std::vector<Real>(static_cast<size_t>(p->numel()), Real(0))
                                            : p->grad());
    p->zero_grad();
  }

  int64_t total = 0;
  for (auto* p : params) total += p->numel();
  GradCheckReport<Real> report;
  if (total == 0) return report;

  for (int64_t probe = 0; probe < probe_count; ++probe) {
    int64_t flat = static_cast<int64_t>(rng.below(static_cast<uint64_t>(total)));
    size_t pi = 0;
    while (flat >= params[pi]->numel()) {
      flat -= params[pi]->numel();
      ++pi;
    }
    Real& coord = params[pi]->mutable_values()[static_cast<size_t>(flat)];
    const Real saved = coord;
    Real f_plus, f_minus;
    {
      NoGradGuard ng;
      coord = saved + step;
      f_plus = loss_fn().item();
      coord = saved - step;
      f_minus = loss_fn().item();
      coord = saved;
    }
    const Real numeric = (f_plus - f_minus) / (Real(2) * step);
    const Real exact = analytic[pi][static_cast<size_t>(flat)];
    Real denom = std::abs(exact) > std::abs(numeric) ? std::abs(exact) : std::abs(numeric);
    if (denom < Real(1e-8)) denom = Real(1e-8);
    const Real rel = std::abs(exact - numeric) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = pi;
      report.worst_index = flat;
    }
    ++report.probes;
  }
  return report;
}

}  // namespace csipred::nn

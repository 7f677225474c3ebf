#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "prnet/autograd.hpp"

namespace prnet {

struct GradCheckOptions {
  double step = 1e-4;        // central-difference half step
  double tolerance = 1e-4;   // on the relative error
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
  // Entries probed per input; 0 probes every entry. Sampled entries are drawn
  // deterministically from `seed`.
  std::int64_t max_probes = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  std::vector<double> max_relative_error;  // one per checked leaf
  double tolerance = 0;

  double worst() const;
  bool passed() const { return worst() < tolerance; }
};

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences. `leaves` must be 64-bit leaf Vars with
/// requires_grad set; `f` is re-evaluated with each probed entry perturbed
/// in place and restored afterwards.
GradCheckReport grad_check(const std::function<Var<double>()>& f, std::vector<Var<double>> leaves,
                           const GradCheckOptions& options = {});

/// Convenience form: wraps `inputs` as fresh leaves and passes them to `f`.
GradCheckReport grad_check(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                           const std::vector<Tensor<double>>& inputs, const GradCheckOptions& options = {});

}  // namespace prnet

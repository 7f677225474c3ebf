#include "prnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "prnet/error.hpp"

namespace prnet {

double GradCheckReport::worst() const {
  double worst = 0;
  for (double e : max_relative_error) worst = std::max(worst, e);
  return worst;
}

GradCheckReport grad_check(const std::function<Var<double>()>& f, std::vector<Var<double>> leaves,
                           const GradCheckOptions& options) {
  for (auto& leaf : leaves) {
    if (!leaf.requires_grad()) throw Error(ErrorKind::usage, "grad_check", "leaf does not require grad");
    leaf.zero_grad();
  }
  const Var<double> out = f();
  if (out.value().numel() != 1) {
    throw Error(ErrorKind::usage, "grad_check", "function output must be scalar, got " + out.shape().str());
  }
  out.backward();

  auto evaluate = [&f]() {
    NoGradGuard guard;
    return f().value()[0];
  };

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (auto& leaf : leaves) {
    const Tensor<double> analytic = leaf.grad().empty() ? Tensor<double>(leaf.shape()) : leaf.grad();
    std::vector<std::int64_t> probes(static_cast<std::size_t>(leaf.value().numel()));
    std::iota(probes.begin(), probes.end(), 0);
    if (options.max_probes > 0 && options.max_probes < static_cast<std::int64_t>(probes.size())) {
      std::shuffle(probes.begin(), probes.end(), rng);
      probes.resize(static_cast<std::size_t>(options.max_probes));
    }
    double worst = 0;
    for (std::int64_t i : probes) {
      double& x = leaf.mutable_value()[i];
      const double saved = x;
      x = saved + options.step;
      const double plus = evaluate();
      x = saved - options.step;
      const double minus = evaluate();
      x = saved;
      const double numeric = (plus - minus) / (2 * options.step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    report.max_relative_error.push_back(worst);
  }
  return report;
}

GradCheckReport grad_check(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                           const std::vector<Tensor<double>>& inputs, const GradCheckOptions& options) {
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.emplace_back(t, true);
  return grad_check([&] { return f(leaves); }, leaves, options);
}

}  // namespace prnet

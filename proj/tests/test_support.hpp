#pragma once

#include <cstdint>
#include <random>

#include "prnet/tensor.hpp"

namespace prnet::test {

/// Entries with magnitude in [0.1, 1] and random sign, away from ReLU kinks.
template <typename Scalar = double>
Tensor<Scalar> random_tensor(Shape shape, std::uint64_t seed, double lo = 0.1, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  Tensor<Scalar> t(shape);
  for (auto& v : t.values()) v = static_cast<Scalar>(sign(rng) ? mag(rng) : -mag(rng));
  return t;
}

template <typename Scalar = double>
Tensor<Scalar> uniform_tensor(Shape shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<Scalar> t(shape);
  for (auto& v : t.values()) v = static_cast<Scalar>(u(rng));
  return t;
}

template <typename Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return static_cast<double>((a.array() - b.array()).abs().maxCoeff());
}

}  // namespace prnet::test

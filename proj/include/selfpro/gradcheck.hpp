#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "selfpro/types.hpp"

namespace selfpro {

// Evaluates the loss at the current parameter values. When grads is non-null
// it is filled with one gradient per parameter tensor, in the same order.
using LossFn = std::function<double(std::vector<Matrix>* grads)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t n_checked = 0;
};

// Compares the analytic gradient against central differences
// (f(x+e) - f(x-e)) / 2e at n_coords coordinates drawn uniformly from all
// parameter entries. Per coordinate the error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
// Parameters are perturbed in place and restored afterwards.
GradCheckResult grad_check(const LossFn& loss, std::span<Matrix* const> params, double epsilon,
                           std::size_t n_coords, std::uint64_t seed);

}  // namespace selfpro

#include "selfpro/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "selfpro/error.hpp"
#include "selfpro/rng.hpp"

namespace selfpro {
namespace {

double checked(double value, const char* what) {
  if (!std::isfinite(value)) throw Error(ErrorKind::numerical, fmt::format("non-finite loss during {}", what));
  return value;
}

}  // namespace

GradCheckResult grad_check(const LossFn& loss, std::span<Matrix* const> params, double epsilon,
                           std::size_t n_coords, std::uint64_t seed) {
  std::vector<Matrix> analytic;
  checked(loss(&analytic), "the analytic pass");
  if (analytic.size() != params.size()) {
    throw Error(ErrorKind::shape, "loss returned a gradient list of the wrong length");
  }

  std::vector<std::pair<std::size_t, Eigen::Index>> coords;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (Eigen::Index i = 0; i < params[t]->size(); ++i) coords.emplace_back(t, i);
  }
  Rng rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (coords.size() > n_coords) coords.resize(n_coords);

  GradCheckResult result;
  for (auto [t, i] : coords) {
    double& x = params[t]->data()[i];
    const double saved = x;
    x = saved + epsilon;
    const double up = checked(loss(nullptr), "a finite-difference pass");
    x = saved - epsilon;
    const double down = checked(loss(nullptr), "a finite-difference pass");
    x = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[t].data()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
    ++result.n_checked;
  }
  return result;
}

}  // namespace selfpro

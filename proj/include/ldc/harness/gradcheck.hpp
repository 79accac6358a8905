#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldc/types.hpp"

namespace ldc::harness {

/// ||a - b|| / max(||a||, ||b||, 1e-6)
double relative_gradient_error(const Vector& a, const Vector& b);

struct GradCheckResult {
  std::string suite;
  int tasks = 0;
  std::string target;
  int points = 0;
  double max_rel_error = 0.0;
};

struct GradCheckOptions {
  std::string suite = "all";  // all | toy2 | quad_k2 | quad_k3 | quad_k11
  int points = 100;
  std::uint64_t seed = 0;
  double h = 1e-6;
  double gamma = 1e-4;
};

/// Compares every analytic gradient (task gradients and the four partial
/// gradients of f and g, for both tau modes, under a frozen random rescale
/// baseline) against central differences at random points.
/// Throws ConfigError for an unknown suite name.
std::vector<GradCheckResult> gradient_check(const GradCheckOptions& opts);

}  // namespace ldc::harness

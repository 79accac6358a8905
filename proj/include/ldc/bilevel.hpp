#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ldc/core_math.hpp"
#include "ldc/normalization.hpp"
#include "ldc/task_suites.hpp"
#include "ldc/types.hpp"

namespace ldc {

/// Router logits W; the task weights are softmax(W).
struct RouterState {
  Vector logits;

  RouterState() = default;
  explicit RouterState(Vector w) : logits(std::move(w)) {}
  static RouterState uniform(int tasks) { return RouterState(Vector::Zero(tasks)); }

  SimplexWeights weights() const { return softmax(logits); }
  int size() const { return static_cast<int>(logits.size()); }
};

enum class TauMode { ones, sigma };

std::string to_string(TauMode mode);
TauMode parse_tau_mode(const std::string& name);

struct UpperLevelConfig {
  TauMode tau = TauMode::ones;
  SoftAbsParams soft_abs;
  /// 0-based permutation used to chain the adjacent gaps; empty = identity.
  std::vector<int> task_order;

  /// Throws ConfigError if task_order is not a permutation of 0..tasks-1.
  void validate(int tasks) const;
};

/// Reading of the inner step size: beta (default) or beta * lambda.
enum class InnerStepRule { beta, beta_lambda };

/// Inner iteration count: fixed N, or N + ceil(growth * ln(1 + alpha t)).
enum class InnerSchedule { fixed, log };

struct BilevelConfig {
  double lambda = 0.1;
  double alpha = 1e-3;
  double beta = 1e-2;
  int inner_steps = 50;
  InnerStepRule inner_rule = InnerStepRule::beta;
  InnerSchedule inner_schedule = InnerSchedule::fixed;
  double inner_growth = 5.0;
  UpperLevelConfig upper;
  NormalizationMode normalization = NormalizationMode::none;

  void validate(int tasks) const;
  double effective_inner_step() const {
    return inner_rule == InnerStepRule::beta_lambda ? beta * lambda : beta;
  }
  int inner_steps_at(long step) const;
};

/// A scalar together with its partial gradients in x and in the router logits.
struct LevelValue {
  double value = 0.0;
  Vector grad_x;
  Vector grad_w;
};

/// g = sigma . l, grad_x g = G^T sigma, grad_W g = J_sigma^T l.
/// Losses and gradients must already be normalized.
LevelValue lower_value_and_grads(const RouterState& router, const Vector& losses, const Matrix& grads);

/// Upper-level smoothed gap chain
///   f = sum_i s(tau_{p(i)} l_{p(i)} - tau_{p(i+1)} l_{p(i+1)}),  s(d) = sqrt(d^2 + gamma).
/// With tau = sigma the W-gradient includes the chain rule through the tau factors.
/// Throws InvalidInput for fewer than two tasks.
LevelValue upper_value_and_grads(const RouterState& router, const Vector& losses, const Matrix& grads,
                                 const UpperLevelConfig& cfg);

/// The gradient-free part of the upper level: grad_x f = G^T x_coeffs.
/// Lets the solvers fold f and g into a single pass over G.
struct UpperTerms {
  double value = 0.0;
  Vector x_coeffs;
  Vector grad_w;
};
UpperTerms upper_terms(const SimplexWeights& sigma, const Vector& losses, const UpperLevelConfig& cfg);

/// Closed-form argmin_x g(W, x) under the given (frozen) normalization, when
/// the suite provides one. Log normalization has no closed form.
std::optional<Vector> exact_lower_solution(const TaskSuite& suite, const SimplexWeights& sigma,
                                           const NormalizationState& norm);

/// z_{n+1} = z_n - beta_eff * grad_z g(W, z_n), n = 0..steps-1.
/// Throws ConfigError for steps < 1 or beta_eff <= 0, DivergenceError on a
/// non-finite iterate.
Vector inner_z_loop(const RouterState& router, const Vector& z0, const TaskSuite& suite,
                    const NormalizationState& norm, double beta_eff, int steps);

/// How x* is obtained for penalty and stationarity evaluation.
struct LowerSolveOptions {
  bool prefer_exact = true;
  double beta_eff = 0.0;
  int inner_steps = 0;
};

/// Returns x*(W) per `opts`: the closed form when allowed and available,
/// otherwise the warm-started inner loop from `x`. Sets `exact` accordingly.
Vector solve_lower(const RouterState& router, const Vector& x, const TaskSuite& suite,
                   const NormalizationState& norm, const LowerSolveOptions& opts, bool* exact = nullptr);

/// Evaluates the normalized lower-level objective g(W, x).
double lower_value(const RouterState& router, const Vector& x, const TaskSuite& suite,
                   const NormalizationState& norm);

/// p(W, x) = g(W, x) - g(W, x*).
double penalty_value(const RouterState& router, const Vector& x, const TaskSuite& suite,
                     const NormalizationState& norm, const LowerSolveOptions& opts);

/// Squared norm of the full (W, x) gradient of f + lambda (g(W, x) - g(W, x*)).
/// grad_x g(W, x*) is taken as zero when x* is exact.
double stationarity_residual(const RouterState& router, const Vector& x, const TaskSuite& suite,
                             const BilevelConfig& cfg, const NormalizationState& norm,
                             const LowerSolveOptions& opts);

/// Phi = f + lambda g at (W, x).
double penalized_objective(const RouterState& router, const Vector& x, const TaskSuite& suite,
                           const BilevelConfig& cfg, const NormalizationState& norm);

}  // namespace ldc

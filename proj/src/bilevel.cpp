#include "ldc/bilevel.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "ldc/kernels.hpp"

namespace ldc {

std::string to_string(TauMode mode) { return mode == TauMode::sigma ? "sigma" : "ones"; }

TauMode parse_tau_mode(const std::string& name) {
  if (name == "ones") return TauMode::ones;
  if (name == "sigma") return TauMode::sigma;
  throw ConfigError("unknown tau mode '" + name + "' (expected ones or sigma)");
}

void UpperLevelConfig::validate(int tasks) const {
  soft_abs.validate();
  if (task_order.empty()) return;
  if (static_cast<int>(task_order.size()) != tasks) {
    throw ConfigError("task_order must list every task exactly once");
  }
  std::vector<bool> seen(tasks, false);
  for (int t : task_order) {
    if (t < 0 || t >= tasks || seen[t]) throw ConfigError("task_order is not a permutation");
    seen[t] = true;
  }
}

void BilevelConfig::validate(int tasks) const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(lambda)) throw ConfigError("lambda must be positive");
  if (!positive(alpha)) throw ConfigError("alpha must be positive");
  if (!positive(beta)) throw ConfigError("beta must be positive");
  if (inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
  if (!(inner_growth >= 0.0)) throw ConfigError("inner_growth must be >= 0");
  upper.validate(tasks);
}

int BilevelConfig::inner_steps_at(long step) const {
  if (inner_schedule == InnerSchedule::fixed) return inner_steps;
  const double extra = std::ceil(inner_growth * std::log1p(alpha * static_cast<double>(step)));
  return inner_steps + static_cast<int>(extra);
}

namespace {

void check_level_inputs(int k, const Vector& losses, const Matrix& grads) {
  if (losses.size() != k || grads.rows() != k) {
    throw InvalidInput("router has " + std::to_string(k) + " tasks but got " +
                       std::to_string(losses.size()) + " losses and " + std::to_string(grads.rows()) +
                       " gradient rows");
  }
}

}  // namespace

LevelValue lower_value_and_grads(const RouterState& router, const Vector& losses, const Matrix& grads) {
  check_level_inputs(router.size(), losses, grads);
  const SimplexWeights sigma = router.weights();
  LevelValue out;
  out.value = sigma.values().dot(losses);
  out.grad_x = kernels::combine_rows(grads, sigma.values());
  out.grad_w = softmax_jacobian_apply(sigma.values(), losses);
  return out;
}

UpperTerms upper_terms(const SimplexWeights& sigma, const Vector& losses, const UpperLevelConfig& cfg) {
  const int k = static_cast<int>(losses.size());
  if (k < 2) throw InvalidInput("the upper level needs at least two tasks");
  if (sigma.size() != k) throw InvalidInput("upper level: weight count mismatch");

  const bool tau_sigma = cfg.tau == TauMode::sigma;
  auto order = [&](int i) { return cfg.task_order.empty() ? i : cfg.task_order[i]; };
  auto tau = [&](int j) { return tau_sigma ? sigma[j] : 1.0; };

  UpperTerms out;
  // u_j = df / d(tau_j l_j)
  Vector u = Vector::Zero(k);
  for (int i = 0; i + 1 < k; ++i) {
    const int a = order(i);
    const int b = order(i + 1);
    const double d = tau(a) * losses[a] - tau(b) * losses[b];
    out.value += soft_abs(d, cfg.soft_abs);
    const double s = soft_abs_grad(d, cfg.soft_abs);
    u[a] += s;
    u[b] -= s;
  }
  if (tau_sigma) {
    out.x_coeffs = u.cwiseProduct(sigma.values());
    out.grad_w = softmax_jacobian_apply(sigma.values(), u.cwiseProduct(losses));
  } else {
    out.x_coeffs = std::move(u);
    out.grad_w = Vector::Zero(k);
  }
  return out;
}

LevelValue upper_value_and_grads(const RouterState& router, const Vector& losses, const Matrix& grads,
                                 const UpperLevelConfig& cfg) {
  check_level_inputs(router.size(), losses, grads);
  UpperTerms t = upper_terms(router.weights(), losses, cfg);
  LevelValue out;
  out.value = t.value;
  out.grad_x = kernels::combine_rows(grads, t.x_coeffs);
  out.grad_w = std::move(t.grad_w);
  return out;
}

std::optional<Vector> exact_lower_solution(const TaskSuite& suite, const SimplexWeights& sigma,
                                           const NormalizationState& norm) {
  if (!suite.has_lower_level_solution()) return std::nullopt;
  switch (norm.mode) {
    case NormalizationMode::none: return suite.lower_level_solution(sigma);
    case NormalizationMode::rescale: {
      Vector w = sigma.values().cwiseQuotient(norm.baseline);
      w /= w.sum();
      return suite.lower_level_solution(SimplexWeights(std::move(w)));
    }
    case NormalizationMode::log: return std::nullopt;
  }
  return std::nullopt;
}

Vector inner_z_loop(const RouterState& router, const Vector& z0, const TaskSuite& suite,
                    const NormalizationState& norm, double beta_eff, int steps) {
  if (steps < 1) throw ConfigError("inner loop needs at least one iteration");
  if (!(beta_eff > 0.0)) throw ConfigError("inner step size must be positive");
  const SimplexWeights sigma = router.weights();
  Vector z = z0;
  for (int n = 0; n < steps; ++n) {
    const Evaluation e = suite.evaluate(z);
    const NormalizedLosses nl = normalize(e.losses, e.grads, norm);
    z -= beta_eff * kernels::combine_rows(nl.grads, sigma.values());
    if (!z.allFinite()) throw DivergenceError("inner loop iterate became non-finite", n);
  }
  return z;
}

Vector solve_lower(const RouterState& router, const Vector& x, const TaskSuite& suite,
                   const NormalizationState& norm, const LowerSolveOptions& opts, bool* exact) {
  if (opts.prefer_exact) {
    if (auto xs = exact_lower_solution(suite, router.weights(), norm)) {
      if (exact) *exact = true;
      return *xs;
    }
  }
  if (opts.inner_steps < 1 || !(opts.beta_eff > 0.0)) {
    throw ConfigError("suite '" + suite.id() +
                      "' has no usable closed-form lower solution and no inner-loop budget");
  }
  if (exact) *exact = false;
  return inner_z_loop(router, x, suite, norm, opts.beta_eff, opts.inner_steps);
}

double lower_value(const RouterState& router, const Vector& x, const TaskSuite& suite,
                   const NormalizationState& norm) {
  return router.weights().values().dot(normalize_losses(suite.losses(x), norm));
}

double penalty_value(const RouterState& router, const Vector& x, const TaskSuite& suite,
                     const NormalizationState& norm, const LowerSolveOptions& opts) {
  const Vector xs = solve_lower(router, x, suite, norm, opts);
  return lower_value(router, x, suite, norm) - lower_value(router, xs, suite, norm);
}

double stationarity_residual(const RouterState& router, const Vector& x, const TaskSuite& suite,
                             const BilevelConfig& cfg, const NormalizationState& norm,
                             const LowerSolveOptions& opts) {
  bool exact = false;
  const Vector xs = solve_lower(router, x, suite, norm, opts, &exact);

  const Evaluation e = suite.evaluate(x);
  const NormalizedLosses nl = normalize(e.losses, e.grads, norm);
  const LevelValue f = upper_value_and_grads(router, nl.losses, nl.grads, cfg.upper);
  const LevelValue g = lower_value_and_grads(router, nl.losses, nl.grads);

  const Evaluation es = suite.evaluate(xs);
  const NormalizedLosses nls = normalize(es.losses, es.grads, norm);
  const LevelValue gs = lower_value_and_grads(router, nls.losses, nls.grads);

  Vector rx = f.grad_x + cfg.lambda * g.grad_x;
  if (!exact) rx -= cfg.lambda * gs.grad_x;
  const Vector rw = f.grad_w + cfg.lambda * (g.grad_w - gs.grad_w);
  return rx.squaredNorm() + rw.squaredNorm();
}

double penalized_objective(const RouterState& router, const Vector& x, const TaskSuite& suite,
                           const BilevelConfig& cfg, const NormalizationState& norm) {
  const Vector l = normalize_losses(suite.losses(x), norm);
  const SimplexWeights sigma = router.weights();
  return upper_terms(sigma, l, cfg.upper).value + cfg.lambda * sigma.values().dot(l);
}

}  // namespace ldc

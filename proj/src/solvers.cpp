#include "ldc/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "ldc/kernels.hpp"
#include "ldc/metrics.hpp"

namespace ldc {

std::string to_string(Method m) {
  switch (m) {
    case Method::ldc_single: return "ldc_single";
    case Method::ldc_double: return "ldc_double";
    case Method::ls: return "ls";
    case Method::mgda: return "mgda";
  }
  return "ldc_single";
}

Method parse_method(const std::string& name) {
  if (name == "ldc_single") return Method::ldc_single;
  if (name == "ldc_double") return Method::ldc_double;
  if (name == "ls") return Method::ls;
  if (name == "mgda") return Method::mgda;
  throw ConfigError("unknown method '" + name + "' (expected ldc_single, ldc_double, ls or mgda)");
}

std::string to_string(CorrectionMode m) {
  switch (m) {
    case CorrectionMode::inner_loop: return "inner_loop";
    case CorrectionMode::exact: return "exact";
    case CorrectionMode::zero: return "zero";
  }
  return "inner_loop";
}

CorrectionMode parse_correction(const std::string& name) {
  if (name == "inner_loop") return CorrectionMode::inner_loop;
  if (name == "exact") return CorrectionMode::exact;
  if (name == "zero") return CorrectionMode::zero;
  throw ConfigError("unknown correction '" + name + "' (expected inner_loop, exact or zero)");
}

namespace {

struct Prepared {
  Evaluation raw;
  NormalizedLosses normalized;
};

struct Plan {
  StepDiagnostics diag;
  Vector dx;
  std::optional<Vector> dw;
};

void check_raw(const Evaluation& e, long step) {
  if (!e.losses.allFinite() || !e.grads.allFinite()) {
    throw DivergenceError("non-finite loss or gradient at step " + std::to_string(step), step);
  }
  if (e.losses.cwiseAbs().maxCoeff() > kDivergenceBound || e.grads.norm() > kDivergenceBound) {
    throw DivergenceError("loss or gradient norm exceeded 1e12 at step " + std::to_string(step), step);
  }
}

Prepared prepare(TrainState& s, const TaskSuite& suite, bool capture) {
  Prepared p{suite.evaluate(s.x), {}};
  check_raw(p.raw, s.step);
  if (capture) s.norm = capture_baseline(p.raw.losses, std::move(s.norm), s.step);
  p.normalized = normalize(p.raw.losses, p.raw.grads, s.norm);
  if (!p.normalized.losses.allFinite() || !p.normalized.grads.allFinite()) {
    throw DivergenceError("non-finite normalized loss at step " + std::to_string(s.step), s.step);
  }
  return p;
}

double upper_value_or_zero(const SimplexWeights& w, const Vector& l, const UpperLevelConfig& cfg) {
  return l.size() >= 2 ? upper_terms(w, l, cfg).value : 0.0;
}

Vector lower_correction(const TrainState& s, const TaskSuite& suite, const BilevelConfig& cfg,
                        CorrectionMode mode) {
  const int k = s.router.size();
  if (mode == CorrectionMode::zero) return Vector::Zero(k);
  Vector z;
  if (mode == CorrectionMode::exact) {
    auto xs = exact_lower_solution(suite, s.router.weights(), s.norm);
    if (!xs) throw ConfigError("exact correction requested but suite '" + suite.id() +
                               "' has no closed form under this normalization");
    z = std::move(*xs);
  } else {
    z = inner_z_loop(s.router, s.x, suite, s.norm, cfg.effective_inner_step(),
                     cfg.inner_steps_at(s.step));
  }
  const Vector lz = normalize_losses(suite.losses(z), s.norm);
  if (!lz.allFinite()) throw DivergenceError("non-finite loss at the inner-loop output", s.step);
  return softmax_jacobian_apply(s.router.weights().values(), lz);
}

Plan plan_ldc(const TrainState& s, const TaskSuite& suite, const BilevelConfig& cfg, Prepared p,
              bool double_loop, CorrectionMode mode) {
  Plan plan;
  const SimplexWeights sigma = s.router.weights();
  const Vector& l = p.normalized.losses;
  const UpperTerms up = upper_terms(sigma, l, cfg.upper);

  const Vector coeffs = up.x_coeffs + cfg.lambda * sigma.values();
  plan.dx = kernels::combine_rows(p.normalized.grads, coeffs);
  const Vector gwg = softmax_jacobian_apply(sigma.values(), l);
  if (double_loop) {
    const Vector corr = lower_correction(s, suite, cfg, mode);
    plan.dw = up.grad_w + cfg.lambda * (gwg - corr);
    plan.diag.grad_w_g_zn_norm = corr.norm();
    const NormRatio r = norm_ratio(gwg, corr);
    plan.diag.norm_ratio = r.value;
    plan.diag.norm_ratio_capped = r.capped;
  } else {
    plan.dw = up.grad_w + cfg.lambda * gwg;
  }

  plan.diag.f = up.value;
  plan.diag.g = sigma.values().dot(l);
  plan.diag.grad_w_g_norm = gwg.norm();
  plan.diag.sigma = sigma.values();
  plan.diag.normalized_losses = l;
  plan.diag.raw = std::move(p.raw);
  return plan;
}

Plan plan_fixed_weights(const BilevelConfig& cfg, Prepared p, const SimplexWeights& w) {
  Plan plan;
  const Vector& l = p.normalized.losses;
  plan.dx = kernels::combine_rows(p.normalized.grads, w.values());
  plan.diag.f = upper_value_or_zero(w, l, cfg.upper);
  plan.diag.g = w.values().dot(l);
  plan.diag.grad_w_g_norm = softmax_jacobian_apply(w.values(), l).norm();
  plan.diag.sigma = w.values();
  plan.diag.normalized_losses = l;
  plan.diag.raw = std::move(p.raw);
  return plan;
}

Plan plan_mgda(const BilevelConfig& cfg, Prepared p, const MinNormOptions& opts) {
  const MinNormResult mn = min_norm_weights(p.normalized.grads, opts);
  Plan plan = plan_fixed_weights(cfg, std::move(p), mn.weights);
  plan.diag.min_norm_residual = mn.residual;
  return plan;
}

void commit(TrainState& s, Plan& plan) {
  if (!plan.dx.allFinite() || (plan.dw && !plan.dw->allFinite())) {
    throw DivergenceError("non-finite update direction at step " + std::to_string(s.step), s.step);
  }
  s.x_stepper.apply(s.x, plan.dx);
  if (plan.dw) s.w_stepper.apply(s.router.logits, *plan.dw);
  ++s.step;
}

Plan plan_for(const TrainState& s, const TaskSuite& suite, const RunConfig& cfg, Prepared p) {
  switch (cfg.method) {
    case Method::ldc_single: return plan_ldc(s, suite, cfg.bilevel, std::move(p), false, cfg.correction);
    case Method::ldc_double: return plan_ldc(s, suite, cfg.bilevel, std::move(p), true, cfg.correction);
    case Method::ls: return plan_fixed_weights(cfg.bilevel, std::move(p), *cfg.ls_weights);
    case Method::mgda: return plan_mgda(cfg.bilevel, std::move(p), {});
  }
  throw ConfigError("unknown method");
}

}  // namespace

StepDiagnostics ldc_single_step(TrainState& state, const TaskSuite& suite, const BilevelConfig& cfg) {
  Plan plan = plan_ldc(state, suite, cfg, prepare(state, suite, true), false, CorrectionMode::zero);
  commit(state, plan);
  return std::move(plan.diag);
}

StepDiagnostics ldc_double_step(TrainState& state, const TaskSuite& suite, const BilevelConfig& cfg,
                                CorrectionMode mode) {
  Plan plan = plan_ldc(state, suite, cfg, prepare(state, suite, true), true, mode);
  commit(state, plan);
  return std::move(plan.diag);
}

StepDiagnostics ls_step(TrainState& state, const TaskSuite& suite, const SimplexWeights& weights,
                        const BilevelConfig& cfg) {
  if (weights.size() != suite.tasks()) throw InvalidInput("ls_step: weight count mismatch");
  Plan plan = plan_fixed_weights(cfg, prepare(state, suite, true), weights);
  commit(state, plan);
  return std::move(plan.diag);
}

StepDiagnostics mgda_step(TrainState& state, const TaskSuite& suite, const BilevelConfig& cfg,
                          const MinNormOptions& opts) {
  Plan plan = plan_mgda(cfg, prepare(state, suite, true), opts);
  commit(state, plan);
  return std::move(plan.diag);
}

void RunConfig::validate(const TaskSuite& suite) const {
  const int k = suite.tasks();
  const int d = suite.dim();
  if (steps < 1) throw ConfigError("steps: must be >= 1");
  if (record_every < 1) throw ConfigError("record_every: must be >= 1");
  if (epoch_length < 1) throw ConfigError("epoch_length: must be >= 1");
  if (!(loss_floor > 0.0)) throw ConfigError("loss_floor: must be positive");
  if (x0.size() != 0 && x0.size() != d) {
    throw ConfigError("x0: expected " + std::to_string(d) + " entries");
  }
  if (w0.size() != 0 && w0.size() != k) {
    throw ConfigError("w0: expected " + std::to_string(k) + " entries");
  }
  if (!x0.allFinite() || !w0.allFinite()) throw ConfigError("x0/w0: entries must be finite");
  if (random_init && !(init_radius > 0.0)) throw ConfigError("init_radius: must be positive");
  if (w_learning_rate && !(*w_learning_rate > 0.0)) throw ConfigError("alpha_w: must be positive");
  if ((method == Method::ldc_single || method == Method::ldc_double) && k < 2) {
    throw ConfigError("method: ldc methods need at least two tasks");
  }
  if (method == Method::ls) {
    if (!ls_weights) throw ConfigError("ls_weights: required for method ls");
    if (ls_weights->size() != k) throw ConfigError("ls_weights: expected " + std::to_string(k) + " entries");
  }
  if (method == Method::ldc_double && correction == CorrectionMode::exact &&
      !suite.has_lower_level_solution()) {
    throw ConfigError("correction: suite '" + suite.id() + "' has no closed-form lower solution");
  }
  try {
    bilevel.validate(k);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("bilevel: ") + e.what());
  }
}

TrainState initial_state(const RunConfig& cfg, const TaskSuite& suite) {
  const int k = suite.tasks();
  const int d = suite.dim();
  TrainState s;
  if (cfg.random_init) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-cfg.init_radius, cfg.init_radius);
    s.x.resize(d);
    for (int i = 0; i < d; ++i) s.x[i] = u(rng);
  } else {
    s.x = cfg.x0.size() == d ? cfg.x0 : Vector::Zero(d);
  }
  s.router = RouterState(cfg.w0.size() == k ? cfg.w0 : Vector::Zero(k));
  s.norm = make_normalization(cfg.bilevel.normalization, k, cfg.epoch_length, cfg.loss_floor);
  s.x_stepper = Stepper(cfg.x_stepper, cfg.bilevel.alpha, d);
  s.w_stepper = Stepper(cfg.w_stepper, cfg.w_learning_rate.value_or(cfg.bilevel.alpha), k);
  return s;
}

StepDiagnostics step_once(TrainState& state, const TaskSuite& suite, const RunConfig& cfg) {
  Plan plan = plan_for(state, suite, cfg, prepare(state, suite, true));
  commit(state, plan);
  return std::move(plan.diag);
}

namespace {

TrajectoryRecord make_record(long step, const StepDiagnostics& diag, const Vector& x,
                             const Vector& logits, const NormalizationState& norm, double lambda) {
  TrajectoryRecord r;
  r.step = step;
  r.raw_losses = diag.raw.losses;
  r.normalized_losses = diag.normalized_losses;
  r.sigma = diag.sigma;
  r.baseline = norm.baseline;
  r.x = x;
  r.logits = logits;
  r.f = diag.f;
  r.g = diag.g;
  r.phi = diag.f + lambda * diag.g;
  r.residual = pareto_residual(diag.raw.grads);
  r.grad_w_g_norm = diag.grad_w_g_norm;
  r.grad_w_g_zn_norm = diag.grad_w_g_zn_norm;
  r.norm_ratio = diag.norm_ratio;
  r.norm_ratio_capped = diag.norm_ratio_capped;
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

RunResult run(const RunConfig& cfg, const TaskSuite& suite, const RecordSink& sink) {
  cfg.validate(suite);
  using clock = std::chrono::steady_clock;

  TrainState state = initial_state(cfg, suite);
  std::vector<double> micros;
  micros.reserve(static_cast<std::size_t>(cfg.steps));
  std::optional<TrajectoryRecord> last_row;

  for (long t = 0; t < cfg.steps; ++t) {
    const bool record = sink && t % cfg.record_every == 0;
    Vector x_before;
    Vector w_before;
    if (record) {
      x_before = state.x;
      w_before = state.router.logits;
    }
    StepDiagnostics diag;
    const auto start = clock::now();
    try {
      diag = step_once(state, suite, cfg);
    } catch (const DivergenceError& e) {
      if (sink) {
        TrajectoryRecord flagged;
        if (last_row) flagged = *last_row;
        else {
          const int k = suite.tasks();
          flagged.raw_losses = flagged.normalized_losses = flagged.sigma = Vector::Zero(k);
          flagged.baseline = state.norm.baseline;
          flagged.x = state.x;
          flagged.logits = state.router.logits;
        }
        flagged.step = t;
        flagged.step_micros = 0.0;
        flagged.diverged = true;
        sink(flagged);
      }
      throw RunDiverged(e.what(), t, state);
    }
    const double us = std::chrono::duration<double, std::micro>(clock::now() - start).count();
    micros.push_back(us);
    if (record) {
      TrajectoryRecord row = make_record(t, diag, x_before, w_before, state.norm, cfg.bilevel.lambda);
      row.step_micros = us;
      sink(row);
      last_row = std::move(row);
    }
  }

  // closing record at step == steps, no update
  TrainState probe = state;
  Prepared p = prepare(probe, suite, false);
  Plan plan = plan_for(probe, suite, cfg, std::move(p));
  TrajectoryRecord final_row =
      make_record(cfg.steps, plan.diag, state.x, state.router.logits, state.norm, cfg.bilevel.lambda);
  if (sink) sink(final_row);

  RunResult result;
  result.final_losses = final_row.raw_losses;
  result.final_residual = final_row.residual;
  result.steps_completed = cfg.steps;
  const long warmup = std::min<long>(kTimingWarmupSteps, cfg.steps / 10);
  result.median_step_micros = median(std::vector<double>(micros.begin() + warmup, micros.end()));
  result.final_state = std::move(state);
  return result;
}

}  // namespace ldc

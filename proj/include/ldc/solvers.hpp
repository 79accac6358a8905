#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ldc/bilevel.hpp"
#include "ldc/min_norm.hpp"
#include "ldc/normalization.hpp"
#include "ldc/stepper.hpp"
#include "ldc/task_suites.hpp"

namespace ldc {

enum class Method { ldc_single, ldc_double, ls, mgda };

std::string to_string(Method m);
Method parse_method(const std::string& name);

/// Source of the lower-level correction term in the double-loop W update.
enum class CorrectionMode {
  inner_loop,  // z_N from the warm-started inner loop
  exact,       // closed-form x*(W) in place of z_N
  zero         // correction forced to zero
};

std::string to_string(CorrectionMode m);
CorrectionMode parse_correction(const std::string& name);

/// Losses or gradient norms beyond this magnitude count as divergence.
inline constexpr double kDivergenceBound = 1e12;

/// Everything a single training run mutates.
struct TrainState {
  RouterState router;
  Vector x;
  NormalizationState norm;
  Stepper x_stepper;
  Stepper w_stepper;
  long step = 0;
};

struct StepDiagnostics {
  Evaluation raw;            // at x^t, before the update
  Vector normalized_losses;
  Vector sigma;              // weights used for g (router, LS weights or MGDA weights)
  double f = 0.0;
  double g = 0.0;
  double grad_w_g_norm = 0.0;
  std::optional<double> grad_w_g_zn_norm;  // double loop only
  double norm_ratio = 0.0;
  bool norm_ratio_capped = false;
  std::optional<double> min_norm_residual;  // filled by the MGDA step
};

/// Single-loop update: both blocks step from gradients at the same (W^t, x^t),
///   x <- x - a (grad_x f + lambda grad_x g),  W <- W - a (grad_W f + lambda grad_W g).
StepDiagnostics ldc_single_step(TrainState& state, const TaskSuite& suite, const BilevelConfig& cfg);

/// Double-loop update: as the single loop, with -lambda grad_W g(W, z_N) added
/// to the W direction. z_N comes from the inner loop warm-started at x^t
/// unless `mode` substitutes the exact solution or zero.
StepDiagnostics ldc_double_step(TrainState& state, const TaskSuite& suite, const BilevelConfig& cfg,
                                CorrectionMode mode = CorrectionMode::inner_loop);

/// Fixed-weight scalarization: x <- x - step(G^T w). The router is untouched.
StepDiagnostics ls_step(TrainState& state, const TaskSuite& suite, const SimplexWeights& weights,
                        const BilevelConfig& cfg);

/// MGDA: x <- x - step(G^T w*) with w* the min-norm weights of G.
StepDiagnostics mgda_step(TrainState& state, const TaskSuite& suite, const BilevelConfig& cfg,
                          const MinNormOptions& opts = {});

struct RunConfig {
  std::string name = "run";
  Method method = Method::ldc_single;
  BilevelConfig bilevel;
  StepperKind x_stepper = StepperKind::adam;
  StepperKind w_stepper = StepperKind::adam;
  std::optional<double> w_learning_rate;  // defaults to bilevel.alpha
  CorrectionMode correction = CorrectionMode::inner_loop;
  long steps = 1000;
  Vector x0;                // empty: zeros (or random with random_init)
  Vector w0;                // empty: zeros
  bool random_init = false;
  double init_radius = 1.0;
  std::optional<SimplexWeights> ls_weights;
  long record_every = 100;
  long epoch_length = 50;
  double loss_floor = 1e-12;
  std::uint64_t seed = 0;

  /// Throws ConfigError with the offending field name.
  void validate(const TaskSuite& suite) const;
};

struct TrajectoryRecord {
  long step = 0;
  Vector raw_losses;
  Vector normalized_losses;
  Vector sigma;
  Vector baseline;
  Vector x;
  Vector logits;
  double f = 0.0;
  double g = 0.0;
  double phi = 0.0;
  double residual = 0.0;
  double grad_w_g_norm = 0.0;
  std::optional<double> grad_w_g_zn_norm;
  double norm_ratio = 0.0;
  bool norm_ratio_capped = false;
  double step_micros = 0.0;
  bool diverged = false;
};

using RecordSink = std::function<void(const TrajectoryRecord&)>;

struct RunResult {
  TrainState final_state;
  Vector final_losses;
  double final_residual = 0.0;
  long steps_completed = 0;
  double median_step_micros = 0.0;
};

/// Raised by run() when an iterate diverges; carries the last good state.
class RunDiverged : public DivergenceError {
 public:
  RunDiverged(const std::string& what, long step, TrainState last_good)
      : DivergenceError(what, step), last_good_(std::move(last_good)) {}
  const TrainState& last_good() const { return last_good_; }

 private:
  TrainState last_good_;
};

/// Builds the initial state (x0, W0, normalization, steppers) for `cfg`.
TrainState initial_state(const RunConfig& cfg, const TaskSuite& suite);

/// Advances `state` by one step of cfg.method.
StepDiagnostics step_once(TrainState& state, const TaskSuite& suite, const RunConfig& cfg);

/// Steps excluded from the timing median (capped at a tenth of the run).
inline constexpr long kTimingWarmupSteps = 10;

/// Executes cfg.steps steps, emitting a record every record_every steps and a
/// final record at step == cfg.steps. Deterministic for a fixed config.
RunResult run(const RunConfig& cfg, const TaskSuite& suite, const RecordSink& sink = {});

}  // namespace ldc

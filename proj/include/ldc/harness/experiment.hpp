#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ldc/harness/spec.hpp"

namespace ldc::harness {

enum class RunStatus { ok, diverged, failed };
std::string to_string(RunStatus s);

struct RunOutcome {
  std::string name;
  Method method = Method::ldc_single;
  RunStatus status = RunStatus::ok;
  std::string error;
  long steps_completed = 0;
  Vector final_losses;
  double final_residual = 0.0;
  double median_step_micros = 0.0;  // median over timing repetitions
  std::optional<double> delta_m;    // against the baseline run, losses lower-is-better
  std::filesystem::path trajectory;
};

struct ExperimentOptions {
  int threads = 1;
};

struct ExperimentSummary {
  std::vector<RunOutcome> runs;
  bool any_diverged() const;
  bool any_failed() const;
};

/// Executes every run (in parallel up to options.threads), writing
/// <output_dir>/<run>.csv, <run>.meta.json and summary.json.
/// A failing run never stops the others; its status says why.
ExperimentSummary run_experiment(const ExperimentSpec& spec, const ExperimentOptions& options = {});

struct FrontRow {
  double w1 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double residual = 0.0;
  bool dominated = false;  // by one of the supplied candidate points
};

/// Runs LS once per grid weight (w1, 1 - w1) with the settings of `base` and
/// flags rows dominated (within `tol`) by any candidate loss point.
/// Throws ConfigError unless the suite has exactly two tasks.
std::vector<FrontRow> sweep_ls_front(const TaskSuite& suite, const std::vector<double>& w1_grid,
                                     const RunConfig& base, const std::vector<Vector>& candidates,
                                     double tol = 1e-9, int threads = 1);

struct CandidatePoint {
  std::string run;
  double lambda = 0.0;
  Vector losses;
  double residual = 0.0;
  RunStatus status = RunStatus::ok;
};

struct SweepResult {
  std::vector<CandidatePoint> candidates;
  std::vector<FrontRow> front;
};

/// Runs every LDC run of the config (once per sweep.lambdas entry, or at its
/// own lambda), then traces the LS front from sweep.weights. Writes
/// sweep_front.csv and sweep_candidates.csv to the output directory.
SweepResult run_sweep(const ExperimentSpec& spec, const ExperimentOptions& options = {});

}  // namespace ldc::harness

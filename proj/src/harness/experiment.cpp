#include "ldc/harness/experiment.hpp"

#include <algorithm>
#include <exception>
#include <fstream>

#include "ldc/harness/trajectory_io.hpp"
#include "ldc/metrics.hpp"

namespace ldc::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::diverged: return "diverged";
    case RunStatus::failed: return "failed";
  }
  return "failed";
}

bool ExperimentSummary::any_diverged() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.status == RunStatus::diverged; });
}

bool ExperimentSummary::any_failed() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.status == RunStatus::failed; });
}

namespace {

json vec_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json entries_json(const std::vector<std::pair<std::string, std::string>>& entries) {
  json j = json::object();
  for (const auto& [k, v] : entries) j[k] = v;
  return j;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

RunOutcome execute_one(const ExperimentSpec& spec, const TaskSuite& suite, const RunConfig& cfg) {
  RunOutcome out;
  out.name = cfg.name;
  out.method = cfg.method;
  out.trajectory = spec.output_dir / (cfg.name + ".csv");
  try {
    TrajectoryWriter writer(out.trajectory, suite.tasks(), suite.dim());
    try {
      const RunResult res = run(cfg, suite, [&](const TrajectoryRecord& r) { writer.write(r); });
      out.steps_completed = res.steps_completed;
      out.final_losses = res.final_losses;
      out.final_residual = res.final_residual;
      std::vector<double> medians{res.median_step_micros};
      for (int rep = 1; rep < spec.timing_repetitions; ++rep) medians.push_back(run(cfg, suite).median_step_micros);
      out.median_step_micros = median_of(std::move(medians));
    } catch (const RunDiverged& e) {
      out.status = RunStatus::diverged;
      out.error = e.what();
      out.steps_completed = e.step();
      const Evaluation ev = suite.evaluate(e.last_good().x);
      out.final_losses = ev.losses;
      out.final_residual = ev.grads.allFinite() ? pareto_residual(ev.grads) : 0.0;
    }
    writer.close();
  } catch (const std::exception& e) {
    out.status = RunStatus::failed;
    out.error = e.what();
  }
  return out;
}

json outcome_json(const RunOutcome& o) {
  json j;
  j["name"] = o.name;
  j["method"] = to_string(o.method);
  j["status"] = to_string(o.status);
  if (!o.error.empty()) j["error"] = o.error;
  j["steps_completed"] = o.steps_completed;
  j["final_losses"] = vec_json(o.final_losses);
  j["final_residual"] = o.final_residual;
  j["median_step_micros"] = o.median_step_micros;
  if (o.delta_m) j["delta_m_percent"] = *o.delta_m;
  j["trajectory"] = o.trajectory.filename().string();
  return j;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentSpec& spec, const ExperimentOptions& options) {
  fs::create_directories(spec.output_dir);
  const SuitePtr suite = build_suite(spec.suite);
  const int n = static_cast<int>(spec.runs.size());
  ExperimentSummary summary;
  summary.runs.resize(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.threads))
  for (int i = 0; i < n; ++i) {
    summary.runs[static_cast<std::size_t>(i)] = execute_one(spec, *suite, spec.runs[static_cast<std::size_t>(i)]);
  }

  if (!spec.baseline_run.empty()) {
    const auto base = std::find_if(summary.runs.begin(), summary.runs.end(),
                                   [&](const RunOutcome& r) { return r.name == spec.baseline_run; });
    if (base != summary.runs.end() && base->status == RunStatus::ok) {
      const MetricDirections dirs(static_cast<std::size_t>(suite->tasks()), Direction::lower_better);
      const Vector ref = base->final_losses;
      for (RunOutcome& r : summary.runs) {
        if (r.status != RunStatus::ok) continue;
        try {
          r.delta_m = delta_m(r.final_losses, ref, dirs);
        } catch (const InvalidInput&) {
          // a zero baseline loss leaves the comparison undefined
        }
      }
    }
  }

  const json suite_j = entries_json(suite_entries(spec.suite));
  for (std::size_t i = 0; i < summary.runs.size(); ++i) {
    const RunOutcome& o = summary.runs[i];
    if (o.status == RunStatus::failed && !fs::exists(o.trajectory)) continue;
    json meta = outcome_json(o);
    meta["suite"] = suite_j;
    meta["config"] = entries_json(run_entries(spec.runs[i]));
    meta["tasks"] = suite->tasks();
    meta["dim"] = suite->dim();
    meta["columns"] = trajectory_columns(suite->tasks(), suite->dim());
    meta["timing_repetitions"] = spec.timing_repetitions;
    meta["std_convention"] = "population";
    write_json(meta_path(o.trajectory), meta);
  }

  json s;
  s["run_count"] = summary.runs.size();
  s["suite"] = suite_j;
  s["timing_repetitions"] = spec.timing_repetitions;
  if (!spec.baseline_run.empty()) s["baseline_run"] = spec.baseline_run;
  s["runs"] = json::array();
  for (const RunOutcome& o : summary.runs) s["runs"].push_back(outcome_json(o));
  write_json(spec.output_dir / "summary.json", s);
  return summary;
}

std::vector<FrontRow> sweep_ls_front(const TaskSuite& suite, const std::vector<double>& w1_grid,
                                     const RunConfig& base, const std::vector<Vector>& candidates,
                                     double tol, int threads) {
  if (suite.tasks() != 2) throw ConfigError("front tracing needs a two-task suite");
  for (const Vector& c : candidates) {
    if (c.size() != 2) throw InvalidInput("sweep candidates must be two-task loss points");
  }
  const int n = static_cast<int>(w1_grid.size());
  std::vector<FrontRow> rows(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, threads))
  for (int i = 0; i < n; ++i) {
    const auto at = static_cast<std::size_t>(i);
    try {
      RunConfig cfg = base;
      cfg.method = Method::ls;
      const double w1 = w1_grid[at];
      cfg.ls_weights = SimplexWeights(Eigen::Vector2d(w1, 1.0 - w1));
      const RunResult res = run(cfg, suite);
      FrontRow& row = rows[at];
      row.w1 = w1;
      row.l1 = res.final_losses[0];
      row.l2 = res.final_losses[1];
      row.residual = res.final_residual;
      const Vector point = res.final_losses;
      row.dominated = std::any_of(candidates.begin(), candidates.end(),
                                  [&](const Vector& c) { return dominates(c, point, tol); });
    } catch (...) {
      errors[at] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

SweepResult run_sweep(const ExperimentSpec& spec, const ExperimentOptions& options) {
  if (spec.sweep_weights.empty()) throw SpecValidationError("sweep.weights", "required for a sweep");
  const SuitePtr suite = build_suite(spec.suite);
  const auto tmpl = std::find_if(spec.runs.begin(), spec.runs.end(),
                                 [&](const RunConfig& r) { return r.name == spec.sweep_template; });
  if (tmpl == spec.runs.end()) throw SpecValidationError("sweep.template", "no run named '" + spec.sweep_template + "'");

  std::vector<RunConfig> jobs;
  for (const RunConfig& r : spec.runs) {
    if (r.method != Method::ldc_single && r.method != Method::ldc_double) continue;
    if (spec.sweep_lambdas.empty()) {
      jobs.push_back(r);
      continue;
    }
    for (double lambda : spec.sweep_lambdas) {
      RunConfig c = r;
      c.bilevel.lambda = lambda;
      jobs.push_back(std::move(c));
    }
  }

  SweepResult out;
  out.candidates.resize(jobs.size());
  const int n = static_cast<int>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.threads))
  for (int i = 0; i < n; ++i) {
    const RunConfig& c = jobs[static_cast<std::size_t>(i)];
    CandidatePoint& p = out.candidates[static_cast<std::size_t>(i)];
    p.run = c.name;
    p.lambda = c.bilevel.lambda;
    try {
      const RunResult res = run(c, *suite);
      p.losses = res.final_losses;
      p.residual = res.final_residual;
    } catch (const RunDiverged&) {
      p.status = RunStatus::diverged;
    } catch (const std::exception&) {
      p.status = RunStatus::failed;
    }
  }

  std::vector<Vector> points;
  for (const CandidatePoint& p : out.candidates) {
    if (p.status == RunStatus::ok) points.push_back(p.losses);
  }
  out.front = sweep_ls_front(*suite, spec.sweep_weights, *tmpl, points, 1e-9, options.threads);

  fs::create_directories(spec.output_dir);
  {
    std::ofstream f(spec.output_dir / "sweep_front.csv");
    f << "w1,l1,l2,residual,dominated\n";
    for (const FrontRow& r : out.front) {
      f << format_double(r.w1) << ',' << format_double(r.l1) << ',' << format_double(r.l2) << ','
        << format_double(r.residual) << ',' << (r.dominated ? 1 : 0) << '\n';
    }
    if (!f) throw ConfigError("failed writing sweep_front.csv");
  }
  {
    std::ofstream f(spec.output_dir / "sweep_candidates.csv");
    f << "run,lambda,l1,l2,residual,status\n";
    for (const CandidatePoint& p : out.candidates) {
      const bool ok = p.status == RunStatus::ok;
      f << p.run << ',' << format_double(p.lambda) << ',' << (ok ? format_double(p.losses[0]) : "") << ','
        << (ok ? format_double(p.losses[1]) : "") << ',' << (ok ? format_double(p.residual) : "") << ','
        << to_string(p.status) << '\n';
    }
    if (!f) throw ConfigError("failed writing sweep_candidates.csv");
  }
  return out;
}

}  // namespace ldc::harness

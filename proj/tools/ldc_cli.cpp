// ldc: experiment driver for the loss-discrepancy-control toolkit.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 a run diverged.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "ldc/harness/experiment.hpp"
#include "ldc/harness/gradcheck.hpp"
#include "ldc/harness/plot.hpp"
#include "ldc/harness/trajectory_io.hpp"
#include "ldc/metrics.hpp"

namespace fs = std::filesystem;
using namespace ldc;
using namespace ldc::harness;

namespace {

struct Globals {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

std::string join(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

ExperimentSpec load_with_overrides(const std::string& path, const Globals& g) {
  ExperimentSpec spec = load_spec(path);
  if (g.out) spec.output_dir = *g.out;
  if (g.seed) apply_seed(spec, *g.seed);
  return spec;
}

int cmd_run(const std::string& path, const Globals& g) {
  const ExperimentSpec spec = load_with_overrides(path, g);
  const ExperimentSummary s = run_experiment(spec, {g.threads});
  for (const RunOutcome& r : s.runs) {
    std::printf("%-20s %-10s %-8s steps=%ld residual=%.3e losses=[%s] step_us=%.2f", r.name.c_str(),
                to_string(r.method).c_str(), to_string(r.status).c_str(), r.steps_completed, r.final_residual,
                join(r.final_losses).c_str(), r.median_step_micros);
    if (r.delta_m) std::printf(" delta_m=%.4f%%", *r.delta_m);
    std::printf("\n");
    if (!r.error.empty()) std::fprintf(stderr, "%s: %s\n", r.name.c_str(), r.error.c_str());
  }
  std::printf("%zu runs, summary in %s\n", s.runs.size(), (spec.output_dir / "summary.json").string().c_str());
  if (s.any_diverged()) return 2;
  return s.any_failed() ? 1 : 0;
}

int cmd_sweep(const std::string& path, const Globals& g) {
  const ExperimentSpec spec = load_with_overrides(path, g);
  const SweepResult r = run_sweep(spec, {g.threads});
  bool diverged = false;
  std::printf("candidates\n");
  for (const CandidatePoint& c : r.candidates) {
    std::printf("  %-20s lambda=%-10g %-8s", c.run.c_str(), c.lambda, to_string(c.status).c_str());
    if (c.status == RunStatus::ok) std::printf(" losses=[%s] residual=%.3e", join(c.losses).c_str(), c.residual);
    std::printf("\n");
    diverged = diverged || c.status == RunStatus::diverged;
  }
  std::printf("ls front\n");
  for (const FrontRow& f : r.front) {
    std::printf("  w1=%-8g l1=%-14.8g l2=%-14.8g residual=%.3e%s\n", f.w1, f.l1, f.l2, f.residual,
                f.dominated ? "  dominated" : "");
  }
  return diverged ? 2 : 0;
}

int cmd_gradcheck(const std::string& suite, int points, const Globals& g) {
  GradCheckOptions o;
  o.suite = suite;
  o.points = points;
  o.seed = g.seed.value_or(0);
  bool ok = true;
  for (const GradCheckResult& r : gradient_check(o)) {
    const bool pass = r.max_rel_error <= 1e-5;
    ok = ok && pass;
    std::printf("%-9s K=%-3d %-20s points=%d max_rel_err=%.3e %s\n", r.suite.c_str(), r.tasks, r.target.c_str(),
                r.points, r.max_rel_error, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

int cmd_pareto(const std::vector<std::string>& files, const Globals& g) {
  std::vector<Trajectory> ts;
  for (const auto& f : files) ts.push_back(read_trajectory(f));
  std::vector<Vector> finals;
  for (const auto& t : ts) {
    if (t.rows.empty()) throw ConfigError(t.path.string() + ": no records");
    finals.push_back(t.rows.back().raw_losses);
  }
  std::string csv = "file,final_losses,residual,dominated_by\n";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::string by;
    for (std::size_t j = 0; j < ts.size(); ++j) {
      if (j != i && finals[j].size() == finals[i].size() && dominates(finals[j], finals[i])) {
        by += (by.empty() ? "" : " ") + ts[j].name;
      }
    }
    std::printf("%-24s losses=[%s] residual=%.3e %s\n", ts[i].name.c_str(), join(finals[i]).c_str(),
                ts[i].rows.back().residual, by.empty() ? "non-dominated" : ("dominated by " + by).c_str());
    csv += ts[i].name + "," + join(finals[i]) + "," + format_double(ts[i].rows.back().residual) + "," + by + "\n";
  }
  if (g.out) {
    fs::create_directories(*g.out);
    std::FILE* f = std::fopen((fs::path(*g.out) / "pareto.csv").string().c_str(), "w");
    if (!f) throw ConfigError("cannot write pareto.csv");
    std::fputs(csv.c_str(), f);
    std::fclose(f);
  }
  return 0;
}

int cmd_plot(const std::string& kind, const std::vector<std::string>& files, bool svg, const Globals& g) {
  const PlotKind k = parse_plot_kind(kind);
  std::vector<Trajectory> ts;
  for (const auto& f : files) ts.push_back(read_trajectory(f));
  for (const auto& p : emit_plot_data(ts, k, g.out.value_or("plots"), svg)) std::printf("%s\n", p.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ldc: multi-task loss-discrepancy control experiments"};
  app.require_subcommand(1);
  Globals g;
  std::string out;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "seed for the suite and every run");
  app.add_option("--threads", g.threads, "parallel runs")->check(CLI::PositiveNumber);

  std::string spec_path;
  auto* run = app.add_subcommand("run", "execute every run in a config file");
  run->add_option("spec", spec_path, "config file")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "trace the LS front and check LDC points against it");
  sweep->add_option("spec", spec_path, "config file")->required()->check(CLI::ExistingFile);

  std::string suite = "all";
  int points = 100;
  auto* grad = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
  grad->add_option("--suite", suite, "all, toy2, quad_k2, quad_k3 or quad_k11");
  grad->add_option("--points", points, "random points per suite")->check(CLI::PositiveNumber);

  std::vector<std::string> files;
  auto* pareto = app.add_subcommand("pareto", "report dominance among final points of trajectory files");
  pareto->add_option("files", files, "trajectory CSV files")->required()->check(CLI::ExistingFile);

  std::string kind;
  bool svg = false;
  auto* plot = app.add_subcommand("plot", "write plot data (and optional SVG) from trajectory files");
  plot->add_option("--kind", kind, "loss_space, weights_over_time, residual_over_time or timing_bars")->required();
  plot->add_flag("--svg", svg, "also render an SVG");
  plot->add_option("files", files, "trajectory CSV files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  if (app.count("--out")) g.out = out;
  if (app.count("--seed")) g.seed = seed;
#ifdef _OPENMP
  omp_set_num_threads(g.threads);
#endif

  try {
    if (*run) return cmd_run(spec_path, g);
    if (*sweep) return cmd_sweep(spec_path, g);
    if (*grad) return cmd_gradcheck(suite, points, g);
    if (*pareto) return cmd_pareto(files, g);
    if (*plot) return cmd_plot(kind, files, svg, g);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

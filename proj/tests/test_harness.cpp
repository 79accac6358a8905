#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "ldc/harness/experiment.hpp"
#include "ldc/harness/gradcheck.hpp"
#include "ldc/harness/plot.hpp"
#include "ldc/harness/spec.hpp"
#include "ldc/harness/trajectory_io.hpp"
#include "ldc/metrics.hpp"
#include "support/generators.hpp"

namespace fs = std::filesystem;
using namespace ldc;
using namespace ldc::harness;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ldc_harness_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Drops the trailing step_micros field of every line.
std::vector<std::string> without_timing(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) out.push_back(l.substr(0, l.rfind(',')));
  return out;
}

std::vector<std::vector<double>> numeric_rows(const fs::path& p) {
  std::vector<std::vector<double>> rows;
  for (const auto& l : lines_of(p)) {
    if (l.empty() || l[0] == '#') continue;
    std::istringstream in(l);
    std::vector<double> r;
    for (std::string tok; in >> tok;) r.push_back(std::strtod(tok.c_str(), nullptr));
    rows.push_back(r);
  }
  return rows;
}

const char* kToyBatch = R"(
# five starts on the toy landscape
suite = toy2
output_dir = unused

[run.start1]
method = ldc_single
normalization = rescale
steps = 1000
record_every = 100
x0 = -8.5, 7.5

[run.start2]
method = ldc_single
normalization = rescale
steps = 1000
record_every = 100
x0 = -8.5, 5

[run.start3]
method = ldc_single
normalization = rescale
steps = 1000
record_every = 100
x0 = 0, 0

[run.start4]
method = ldc_single
normalization = rescale
steps = 1000
record_every = 100
x0 = 9, 9

[run.start5]
method = ldc_single
normalization = rescale
steps = 1000
record_every = 100
x0 = 10, -8
)";

}  // namespace

// ---------------------------------------------------------------- config

TEST_CASE("minimal config gets defaults") {
  const ExperimentSpec s = parse_spec("suite = toy2\n[run.a]\nmethod = ldc_single\nsteps = 1000\n");
  REQUIRE(s.runs.size() == 1);
  const RunConfig& r = s.runs[0];
  CHECK(r.name == "a");
  CHECK(r.steps == 1000);
  CHECK(r.bilevel.lambda == RunConfig{}.bilevel.lambda);
  CHECK(r.x_stepper == StepperKind::adam);
  CHECK(s.output_dir == "out");
  CHECK(s.timing_repetitions == 1);
  CHECK_NOTHROW(r.validate(Toy2Suite()));
}

TEST_CASE("config errors name the field or line") {
  try {
    parse_spec("suite = toy2\n[run.a]\nlambda = -0.1\n");
    FAIL("expected a validation error");
  } catch (const SpecValidationError& e) {
    CHECK(e.field() == "run.a.lambda");
  }
  try {
    parse_spec("suite = toy2\n[run.a]\nsteps = 5\nsteps = 6\n");
    FAIL("expected a parse error");
  } catch (const SpecParseError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(parse_spec("suite = toy2\n[run.a]\nspeed = 3\n"), SpecValidationError);
  CHECK_THROWS_AS(parse_spec("suite = toy2\nthis line has no equals sign\n"), SpecParseError);
  CHECK_THROWS_AS(parse_spec("suite = cube\n"), SpecValidationError);
  CHECK_THROWS_AS(parse_spec("suite = toy2\n[run.a]\nsteps = 0\n"), SpecValidationError);
  CHECK_THROWS_AS(parse_spec("suite = toy2\n[run.a]\nx0 = 1, 2, 3\n"), SpecValidationError);
  CHECK_THROWS_AS(parse_spec("suite = toy2\nbaseline_run = nope\n"), SpecValidationError);
  CHECK_THROWS_AS(parse_spec("suite = quad_random\nsuite.tasks = 3\nsuite.dim = 2\nsweep.weights = 0.5\nsweep.template = a\n[run.a]\n"),
                  SpecValidationError);
}

TEST_CASE("hyperparameter-table style config round trips bit for bit") {
  const std::string text = R"(
suite = quad_random
suite.tasks = 2
suite.dim = 5
suite.seed = 42
suite.condition = 3.5
output_dir = results/city
timing_repetitions = 5
baseline_run = ls

[run.ldc]
method = ldc_double
alpha = 3e-4
lambda = 0.1
tau = ones
gamma = 1e-8
beta = 0.01
inner_steps = 50
normalization = log
epoch_length = 50
steps = 2000
x0 = 0.1, -0.2, 0.30000000000000004, 1e-300, 5
task_order = 2, 1

[run.ls]
method = ls
ls_weights = 0.5, 0.5
stepper = gd
alpha = 3e-4
)";
  const ExperimentSpec a = parse_spec(text);
  CHECK(a.runs[0].bilevel.alpha == 3e-4);
  CHECK(a.runs[0].bilevel.lambda == 0.1);
  CHECK(a.runs[0].bilevel.upper.tau == TauMode::ones);
  CHECK(a.runs[0].bilevel.upper.task_order == std::vector<int>{1, 0});

  const std::string once = format_spec(a);
  const ExperimentSpec b = parse_spec(once);
  CHECK(format_spec(b) == once);
  CHECK(b.runs[0].x0 == a.runs[0].x0);
  CHECK(std::memcmp(&b.runs[0].bilevel.alpha, &a.runs[0].bilevel.alpha, sizeof(double)) == 0);

  const fs::path dir = scratch("roundtrip");
  save_spec(a, dir / "spec.cfg");
  const ExperimentSpec c = load_spec(dir / "spec.cfg");
  CHECK(format_spec(c) == once);
  CHECK(run_entries(c.runs[1]) == run_entries(a.runs[1]));
}

TEST_CASE("explicit quadratic suites parse") {
  const ExperimentSpec s = parse_spec(R"(
suite = quad
suite.tasks = 2
suite.dim = 2
suite.A.1 = 2, 0, 0, 1
suite.A.2 = 1, 0.5, 0.5, 3
suite.center.1 = 0, 0
suite.center.2 = 1, 2
suite.offset.2 = 0.25
suite.scales = 1, 10
)");
  const SuitePtr q = build_suite(s.suite);
  CHECK(q->tasks() == 2);
  const Vector l = q->losses(Eigen::Vector2d(1, 2));
  CHECK(l[0] == doctest::Approx(3.0));
  CHECK(l[1] == doctest::Approx(2.5));
  CHECK(parse_spec(format_spec(s)).suite.quad.hessians[1] == s.suite.quad.hessians[1]);
}

TEST_CASE("shortest double formatting round trips") {
  testgen::Gen gen(91);
  for (int t = 0; t < 5000; ++t) {
    const double v = gen.normal() * std::pow(10.0, gen.integer(-300, 300));
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(3e-4) == "3e-04");
}

// ---------------------------------------------------------------- experiments

TEST_CASE("empty run list") {
  ExperimentSpec s = parse_spec("suite = toy2\n");
  s.output_dir = scratch("empty");
  const ExperimentSummary sum = run_experiment(s);
  CHECK(sum.runs.empty());
  CHECK_FALSE(sum.any_failed());
  CHECK(fs::exists(s.output_dir / "summary.json"));
}

TEST_CASE("toy batch writes one trajectory per start and is reproducible") {
  ExperimentSpec s = parse_spec(kToyBatch);
  s.output_dir = scratch("toy_a");
  const ExperimentSummary a = run_experiment(s);
  REQUIRE(a.runs.size() == 5);
  for (const RunOutcome& r : a.runs) {
    CHECK(r.status == RunStatus::ok);
    CHECK(fs::exists(r.trajectory));
    CHECK(fs::exists(meta_path(r.trajectory)));
  }

  ExperimentSpec s2 = s;
  s2.output_dir = scratch("toy_b");
  const ExperimentSummary b = run_experiment(s2, {2});
  for (std::size_t i = 0; i < 5; ++i) {
    const auto la = lines_of(a.runs[i].trajectory), lb = lines_of(b.runs[i].trajectory);
    CHECK(la.size() == 12);  // header, steps 0..900, final 1000
    CHECK(without_timing(la) == without_timing(lb));
  }

  const Trajectory t = read_trajectory(a.runs[0].trajectory);
  CHECK(t.tasks == 2);
  CHECK(t.meta["std_convention"] == "population");
  CHECK(t.meta["method"] == "ldc_single");
  CHECK(t.rows.front().step == 0);
  CHECK(t.rows.back().step == 1000);
  for (std::size_t i = 1; i < t.rows.size(); ++i) CHECK(t.rows[i].step > t.rows[i - 1].step);
}

TEST_CASE("trajectories replay from their checkpoints") {
  ExperimentSpec s = parse_spec(R"(
suite = quad_random
suite.tasks = 3
suite.dim = 4
suite.seed = 3

[run.single]
method = ldc_single
tau = sigma
normalization = rescale
steps = 300
record_every = 25
init = random

[run.double]
method = ldc_double
normalization = log
epoch_length = 40
inner_steps = 5
steps = 300
record_every = 30
init = random
seed = 4
)");
  s.output_dir = scratch("replay");
  const ExperimentSummary sum = run_experiment(s);
  const SuitePtr suite = build_suite(s.suite);
  for (std::size_t i = 0; i < sum.runs.size(); ++i) {
    const RunConfig& cfg = s.runs[i];
    const Trajectory t = read_trajectory(sum.runs[i].trajectory);
    REQUIRE(t.rows.size() > 5);
    for (const TrajectoryRecord& r : t.rows) {
      NormalizationState ns = make_normalization(cfg.bilevel.normalization, 3, cfg.epoch_length, cfg.loss_floor);
      ns.baseline = r.baseline;
      ns.captured = true;
      const Evaluation e = suite->evaluate(r.x);
      const Vector l = normalize_losses(e.losses, ns);
      const SimplexWeights sigma = softmax(r.logits);
      const double f = upper_terms(sigma, l, cfg.bilevel.upper).value;
      const double g = sigma.values().dot(l);
      CHECK(std::abs(f - r.f) <= 1e-9 * (1 + std::abs(f)));
      CHECK(std::abs(g - r.g) <= 1e-9 * (1 + std::abs(g)));
      CHECK(std::abs(pareto_residual(e.grads) - r.residual) <= 1e-9 * (1 + r.residual));
      CHECK((e.losses - r.raw_losses).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("summary delta_m equals a direct call on final losses") {
  ExperimentSpec s = parse_spec(R"(
suite = quad_random
suite.tasks = 2
suite.dim = 3
suite.seed = 8
baseline_run = ls

[run.ls]
method = ls
ls_weights = 0.5, 0.5
steps = 200

[run.ldc]
method = ldc_single
steps = 200
)");
  s.output_dir = scratch("delta");
  const ExperimentSummary sum = run_experiment(s);
  REQUIRE(sum.runs[1].delta_m.has_value());
  const double direct = delta_m(sum.runs[1].final_losses, sum.runs[0].final_losses,
                                {Direction::lower_better, Direction::lower_better});
  CHECK(*sum.runs[1].delta_m == direct);
  CHECK(*sum.runs[0].delta_m == 0.0);
}

TEST_CASE("a failing run does not stop the batch") {
  ExperimentSpec s = parse_spec(R"(
suite = quad_random
suite.tasks = 2
suite.dim = 3
suite.condition = 10

[run.blowup]
method = ldc_single
stepper = gd
stepper_w = gd
alpha = 5
steps = 5000
x0 = 1, 1, 1

[run.fine]
method = mgda
steps = 50
)");
  s.output_dir = scratch("fail");
  const ExperimentSummary sum = run_experiment(s);
  CHECK(sum.runs[0].status == RunStatus::diverged);
  CHECK(sum.runs[1].status == RunStatus::ok);
  CHECK(sum.any_diverged());
  const Trajectory t = read_trajectory(sum.runs[0].trajectory);
  CHECK(t.rows.back().diverged);
}

// ---------------------------------------------------------------- sweep

TEST_CASE("ls sweep traces the analytic front") {
  auto pair = symmetric_quad_pair();
  RunConfig base;
  base.method = Method::ls;
  base.x_stepper = StepperKind::gd;
  base.bilevel.alpha = 0.5;
  base.steps = 200;
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(0.1 * i);
  grid.push_back(1.0);
  const std::vector<FrontRow> rows = sweep_ls_front(*pair, grid, base, {Eigen::Vector2d(0.4, 0.4)});
  REQUIRE(rows.size() == grid.size());
  for (const FrontRow& r : rows) {
    CHECK(pair->distance_to_front(Eigen::Vector2d(r.l1, r.l2)) <= 1e-6);
    CHECK(r.dominated == (std::abs(r.w1 - 0.5) < 1e-12));
  }
  const FrontRow& end = rows.back();
  CHECK(std::abs(end.l1) <= 1e-12);
  CHECK(std::abs(end.l2 - 2.0) <= 1e-12);

  std::vector<double> fewer = grid;
  fewer.erase(fewer.begin() + 3);
  const std::vector<FrontRow> rows2 = sweep_ls_front(*pair, fewer, base, {Eigen::Vector2d(0.4, 0.4)}, 1e-9, 2);
  REQUIRE(rows2.size() == rows.size() - 1);
  for (std::size_t i = 0, j = 0; i < rows.size(); ++i) {
    if (i == 3) continue;
    CHECK(rows[i].l1 == rows2[j].l1);
    CHECK(rows[i].l2 == rows2[j].l2);
    ++j;
  }

  CHECK_THROWS_AS(sweep_ls_front(*random_quad_suite(3, 2, 1), grid, base, {}), ConfigError);
}

TEST_CASE("sweep command writes front and candidates") {
  ExperimentSpec s = parse_spec(R"(
suite = quad_pair
sweep.weights = 0, 0.25, 0.5, 0.75, 1
sweep.lambdas = 0.1, 1
sweep.template = ls

[run.ls]
method = ls
ls_weights = 0.5, 0.5
stepper = gd
alpha = 0.5
steps = 200

[run.ldc]
method = ldc_single
steps = 500
alpha = 0.01
)");
  s.output_dir = scratch("sweep");
  const SweepResult r = run_sweep(s);
  CHECK(r.front.size() == 5);
  CHECK(r.candidates.size() == 2);
  CHECK(fs::exists(s.output_dir / "sweep_front.csv"));
  CHECK(fs::exists(s.output_dir / "sweep_candidates.csv"));
}

// ---------------------------------------------------------------- plots

TEST_CASE("plot kinds") {
  CHECK(parse_plot_kind("loss_space") == PlotKind::loss_space);
  try {
    parse_plot_kind("histogram");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    for (const char* k : {"loss_space", "weights_over_time", "residual_over_time", "timing_bars"}) {
      CHECK(m.find(k) != std::string::npos);
    }
  }

  ExperimentSpec toy = parse_spec(kToyBatch);
  toy.runs.resize(2);
  toy.output_dir = scratch("plot_toy");
  const ExperimentSummary ts = run_experiment(toy);
  const Trajectory t = read_trajectory(ts.runs[0].trajectory);
  const fs::path out = scratch("plot_out");
  const auto files = emit_plot_data({t}, PlotKind::loss_space, out, true);
  REQUIRE(files.size() == 2);
  const auto rows = numeric_rows(files[0]);
  REQUIRE(rows.size() == t.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 2);
    CHECK(rows[i][0] == t.rows[i].raw_losses[0]);
    CHECK(rows[i][1] == t.rows[i].raw_losses[1]);
  }
  CHECK(lines_of(files[1]).front().rfind("<svg", 0) == 0);

  ExperimentSpec big = parse_spec(R"(
suite = quad_random
suite.tasks = 11
suite.dim = 6
output_dir = unused

[run.ls]
method = ls
ls_weights = 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05, 0.05
steps = 200
record_every = 20

[run.ldc_single]
method = ldc_single
tau = sigma
steps = 200
record_every = 20

[run.mgda]
method = mgda
steps = 200
record_every = 20
)");
  big.output_dir = scratch("plot_big");
  const ExperimentSummary bs = run_experiment(big);
  std::vector<Trajectory> bt;
  for (const auto& r : bs.runs) bt.push_back(read_trajectory(r.trajectory));

  const auto wf = emit_plot_data({bt[1]}, PlotKind::weights_over_time, out, false);
  for (const auto& row : numeric_rows(wf[0])) {
    REQUIRE(row.size() == 12);
    double sum = 0.0;
    for (std::size_t i = 1; i < row.size(); ++i) sum += row[i];
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }

  const auto rf = emit_plot_data({bt[2]}, PlotKind::residual_over_time, out, false);
  CHECK(numeric_rows(rf[0]).size() == bt[2].rows.size());

  const auto tf = emit_plot_data(bt, PlotKind::timing_bars, out, true);
  const auto lines = lines_of(tf[0]);
  REQUIRE(lines.size() == 4);
  std::map<std::string, std::pair<double, double>> bars;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    std::string m;
    double us = 0, ratio = 0;
    in >> m >> us >> ratio;
    bars[m] = {us, ratio};
  }
  REQUIRE(bars.count("ldc_single"));
  CHECK(bars["ls"].second == 1.0);
  CHECK(bars["ldc_single"].second == doctest::Approx(bars["ldc_single"].first / bars["ls"].first));
}

TEST_CASE("gradcheck rejects unknown suites and covers every target") {
  GradCheckOptions o;
  o.suite = "sphere";
  CHECK_THROWS_AS(gradient_check(o), ConfigError);
  o.suite = "toy2";
  o.points = 20;
  const auto r = gradient_check(o);
  CHECK(r.size() == 7);
  for (const auto& x : r) CHECK(x.max_rel_error <= 1e-5);
}

#include "ldc/harness/spec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ldc::harness {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<std::pair<std::string, Entry>> entries;
};

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (!v.empty() && v.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& field) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw SpecValidationError(field, "'" + s + "' is not a number");
  }
  if (!std::isfinite(v)) throw SpecValidationError(field, "must be finite");
  return v;
}

long to_long(const std::string& s, const std::string& field) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw SpecValidationError(field, "'" + s + "' is not an integer");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s, const std::string& field) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw SpecValidationError(field, "'" + s + "' is not an unsigned integer");
  }
  return v;
}

Vector to_vector(const std::string& s, const std::string& field) {
  const auto items = split_list(s);
  if (items.empty()) throw SpecValidationError(field, "empty list");
  Vector v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_double(items[i], field);
  return v;
}

std::vector<double> to_doubles(const std::string& s, const std::string& field) {
  const Vector v = to_vector(s, field);
  return {v.data(), v.data() + v.size()};
}

double positive(const std::string& s, const std::string& field) {
  const double v = to_double(s, field);
  if (!(v > 0.0)) throw SpecValidationError(field, "must be positive");
  return v;
}

long at_least(const std::string& s, const std::string& field, long lo) {
  const long v = to_long(s, field);
  if (v < lo) throw SpecValidationError(field, "must be >= " + std::to_string(lo));
  return v;
}

template <class F>
auto rethrow_as(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const SpecValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw SpecValidationError(field, e.what());
  }
}

std::string list_text(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

std::string list_text(const std::vector<double>& v) {
  return list_text(Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))));
}

std::string inner_rule_text(InnerStepRule r) { return r == InnerStepRule::beta_lambda ? "beta_lambda" : "beta"; }
std::string schedule_text(InnerSchedule s) { return s == InnerSchedule::log ? "log" : "fixed"; }

std::pair<std::map<std::string, Entry>, std::vector<Section>> tokenize(const std::string& text) {
  std::map<std::string, Entry> globals;
  std::vector<Section> sections;
  std::set<std::string> section_names;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw SpecParseError(line_no, "unterminated section header");
      const std::string head = trim(line.substr(1, line.size() - 2));
      if (head.rfind("run.", 0) != 0 || !valid_name(head.substr(4))) {
        throw SpecParseError(line_no, "section must be [run.<name>] with a name of letters, digits, '_' or '-'");
      }
      if (!section_names.insert(head).second) throw SpecParseError(line_no, "duplicate section [" + head + "]");
      sections.push_back({head.substr(4), line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SpecParseError(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw SpecParseError(line_no, "missing key before '='");
    if (sections.empty()) {
      if (!globals.emplace(key, Entry{value, line_no}).second) {
        throw SpecParseError(line_no, "duplicate key '" + key + "'");
      }
    } else {
      auto& entries = sections.back().entries;
      for (const auto& [k, e] : entries) {
        if (k == key) throw SpecParseError(line_no, "duplicate key '" + key + "'");
      }
      entries.emplace_back(key, Entry{value, line_no});
    }
  }
  return {std::move(globals), std::move(sections)};
}

SuiteSpec parse_suite(std::map<std::string, Entry>& g) {
  SuiteSpec s;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = g.find(key);
    if (it == g.end()) return std::nullopt;
    std::string v = it->second.value;
    g.erase(it);
    return v;
  };

  if (auto v = take("suite")) s.id = *v;
  const auto tasks = take("suite.tasks");
  const auto dim = take("suite.dim");
  const auto seed = take("suite.seed");
  const auto cond = take("suite.condition");
  const auto scales = take("suite.scales");

  if (s.id == "toy2" || s.id == "quad_pair") {
    s.tasks = 2;
    s.dim = s.id == "toy2" ? 2 : 1;
    if (tasks && to_long(*tasks, "suite.tasks") != s.tasks) {
      throw SpecValidationError("suite.tasks", "suite " + s.id + " has exactly 2 tasks");
    }
    if (dim && to_long(*dim, "suite.dim") != s.dim) {
      throw SpecValidationError("suite.dim", "suite " + s.id + " has dimension " + std::to_string(s.dim));
    }
  } else if (s.id == "quad" || s.id == "quad_random") {
    if (!tasks) throw SpecValidationError("suite.tasks", "required for suite " + s.id);
    if (!dim) throw SpecValidationError("suite.dim", "required for suite " + s.id);
    s.tasks = static_cast<int>(at_least(*tasks, "suite.tasks", 1));
    s.dim = static_cast<int>(at_least(*dim, "suite.dim", 1));
  } else {
    throw SpecValidationError("suite", "unknown suite '" + s.id + "' (expected toy2, quad, quad_random or quad_pair)");
  }

  if (s.id == "quad_random") {
    if (seed) s.seed = to_u64(*seed, "suite.seed");
    if (cond) {
      s.condition = to_double(*cond, "suite.condition");
      if (!(s.condition >= 1.0)) throw SpecValidationError("suite.condition", "must be >= 1");
    }
  } else {
    if (seed) throw SpecValidationError("suite.seed", "only used by suite quad_random");
    if (cond) throw SpecValidationError("suite.condition", "only used by suite quad_random");
  }

  if (s.id == "quad") {
    const int d = s.dim;
    for (int i = 1; i <= s.tasks; ++i) {
      const std::string n = std::to_string(i);
      const auto a = take("suite.A." + n);
      if (!a) throw SpecValidationError("suite.A." + n, "required");
      const Vector flat = to_vector(*a, "suite.A." + n);
      if (flat.size() != static_cast<Eigen::Index>(d) * d) {
        throw SpecValidationError("suite.A." + n, "expected " + std::to_string(d * d) + " entries (row-major)");
      }
      Matrix m(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) m(r, c) = flat[r * d + c];
      s.quad.hessians.push_back(std::move(m));

      const auto c = take("suite.center." + n);
      if (!c) throw SpecValidationError("suite.center." + n, "required");
      Vector center = to_vector(*c, "suite.center." + n);
      if (center.size() != d) {
        throw SpecValidationError("suite.center." + n, "expected " + std::to_string(d) + " entries");
      }
      s.quad.centers.push_back(std::move(center));

      const auto o = take("suite.offset." + n);
      s.quad.offsets.push_back(o ? to_double(*o, "suite.offset." + n) : 0.0);
    }
  }

  if (scales) {
    s.scales = to_vector(*scales, "suite.scales");
    if (s.scales.size() != s.tasks) {
      throw SpecValidationError("suite.scales", "expected " + std::to_string(s.tasks) + " entries");
    }
    if ((s.scales.array() <= 0.0).any()) throw SpecValidationError("suite.scales", "entries must be positive");
  }
  return s;
}

RunConfig parse_run(const Section& sec, const TaskSuite& suite) {
  RunConfig r;
  r.name = sec.name;
  const std::string base = "run." + sec.name + ".";
  std::optional<Vector> ls_weights;
  std::optional<Vector> task_order;
  std::string init = "fixed";

  for (const auto& [key, e] : sec.entries) {
    const std::string f = base + key;
    const std::string& v = e.value;
    if (key == "method") r.method = rethrow_as(f, [&] { return parse_method(v); });
    else if (key == "steps") r.steps = at_least(v, f, 1);
    else if (key == "lambda") r.bilevel.lambda = positive(v, f);
    else if (key == "alpha") r.bilevel.alpha = positive(v, f);
    else if (key == "alpha_w") r.w_learning_rate = positive(v, f);
    else if (key == "beta") r.bilevel.beta = positive(v, f);
    else if (key == "beta_mode") {
      if (v == "beta") r.bilevel.inner_rule = InnerStepRule::beta;
      else if (v == "beta_lambda") r.bilevel.inner_rule = InnerStepRule::beta_lambda;
      else throw SpecValidationError(f, "expected beta or beta_lambda");
    } else if (key == "inner_steps") r.bilevel.inner_steps = static_cast<int>(at_least(v, f, 1));
    else if (key == "inner_schedule") {
      if (v == "fixed") r.bilevel.inner_schedule = InnerSchedule::fixed;
      else if (v == "log") r.bilevel.inner_schedule = InnerSchedule::log;
      else throw SpecValidationError(f, "expected fixed or log");
    } else if (key == "inner_growth") {
      r.bilevel.inner_growth = to_double(v, f);
      if (r.bilevel.inner_growth < 0.0) throw SpecValidationError(f, "must be >= 0");
    } else if (key == "tau") r.bilevel.upper.tau = rethrow_as(f, [&] { return parse_tau_mode(v); });
    else if (key == "gamma") r.bilevel.upper.soft_abs.gamma = positive(v, f);
    else if (key == "normalization") r.bilevel.normalization = rethrow_as(f, [&] { return parse_normalization(v); });
    else if (key == "epoch_length") r.epoch_length = at_least(v, f, 1);
    else if (key == "stepper") r.x_stepper = rethrow_as(f, [&] { return parse_stepper(v); });
    else if (key == "stepper_w") r.w_stepper = rethrow_as(f, [&] { return parse_stepper(v); });
    else if (key == "x0") r.x0 = to_vector(v, f);
    else if (key == "w0") r.w0 = to_vector(v, f);
    else if (key == "ls_weights") ls_weights = to_vector(v, f);
    else if (key == "record_every") r.record_every = at_least(v, f, 1);
    else if (key == "seed") r.seed = to_u64(v, f);
    else if (key == "init") {
      if (v != "fixed" && v != "random") throw SpecValidationError(f, "expected fixed or random");
      init = v;
    } else if (key == "init_radius") r.init_radius = positive(v, f);
    else if (key == "task_order") task_order = to_vector(v, f);
    else if (key == "loss_floor") r.loss_floor = positive(v, f);
    else if (key == "correction") r.correction = rethrow_as(f, [&] { return parse_correction(v); });
    else throw SpecValidationError(f, "unknown key (line " + std::to_string(e.line) + ")");
  }
  r.random_init = init == "random";
  if (r.random_init && r.x0.size() != 0) {
    throw SpecValidationError(base + "x0", "cannot be combined with init = random");
  }
  if (ls_weights) {
    r.ls_weights = rethrow_as(base + "ls_weights", [&] { return SimplexWeights(*ls_weights); });
  }
  if (task_order) {
    for (Eigen::Index i = 0; i < task_order->size(); ++i) {
      const double t = (*task_order)[i];
      if (t != std::floor(t)) throw SpecValidationError(base + "task_order", "entries must be integers");
      r.bilevel.upper.task_order.push_back(static_cast<int>(t) - 1);
    }
    rethrow_as(base + "task_order", [&] { r.bilevel.upper.validate(suite.tasks()); return 0; });
  }

  try {
    r.validate(suite);
  } catch (const ConfigError& e) {
    // validate() messages lead with the offending key
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    const std::string key = colon == std::string::npos ? "" : msg.substr(0, colon);
    if (!key.empty() && key.find(' ') == std::string::npos && key != "bilevel") {
      throw SpecValidationError(base + key, trim(msg.substr(colon + 1)));
    }
    throw SpecValidationError("run." + sec.name, msg);
  }
  return r;
}

}  // namespace

SuitePtr build_suite(const SuiteSpec& spec) {
  SuitePtr s;
  if (spec.id == "toy2") s = std::make_shared<Toy2Suite>();
  else if (spec.id == "quad_pair") s = symmetric_quad_pair();
  else if (spec.id == "quad_random") s = random_quad_suite(spec.tasks, spec.dim, spec.seed, spec.condition);
  else if (spec.id == "quad") s = std::make_shared<QuadSuite>(spec.quad);
  else throw SpecValidationError("suite", "unknown suite '" + spec.id + "'");
  if (spec.scales.size() != 0) s = scaled_suite(std::move(s), spec.scales);
  return s;
}

ExperimentSpec parse_spec(const std::string& text) {
  auto [globals, sections] = tokenize(text);
  ExperimentSpec spec;
  spec.suite = parse_suite(globals);
  const SuitePtr suite = rethrow_as("suite", [&] { return build_suite(spec.suite); });

  for (auto& [key, e] : globals) {
    const std::string& v = e.value;
    if (key == "output_dir") spec.output_dir = v;
    else if (key == "timing_repetitions") spec.timing_repetitions = static_cast<int>(at_least(v, key, 1));
    else if (key == "baseline_run") spec.baseline_run = v;
    else if (key == "sweep.weights") spec.sweep_weights = to_doubles(v, key);
    else if (key == "sweep.lambdas") spec.sweep_lambdas = to_doubles(v, key);
    else if (key == "sweep.template") spec.sweep_template = v;
    else throw SpecValidationError(key, "unknown key (line " + std::to_string(e.line) + ")");
  }

  for (const Section& sec : sections) spec.runs.push_back(parse_run(sec, *suite));

  auto has_run = [&](const std::string& n) {
    return std::any_of(spec.runs.begin(), spec.runs.end(), [&](const RunConfig& r) { return r.name == n; });
  };
  if (!spec.baseline_run.empty() && !has_run(spec.baseline_run)) {
    throw SpecValidationError("baseline_run", "no run named '" + spec.baseline_run + "'");
  }
  for (double w : spec.sweep_weights) {
    if (w < 0.0 || w > 1.0) throw SpecValidationError("sweep.weights", "entries must lie in [0, 1]");
  }
  for (double l : spec.sweep_lambdas) {
    if (!(l > 0.0)) throw SpecValidationError("sweep.lambdas", "entries must be positive");
  }
  if (!spec.sweep_weights.empty()) {
    if (spec.suite.tasks != 2) throw SpecValidationError("sweep.weights", "front tracing needs a two-task suite");
    if (spec.sweep_template.empty()) throw SpecValidationError("sweep.template", "required with sweep.weights");
  }
  if (!spec.sweep_template.empty() && !has_run(spec.sweep_template)) {
    throw SpecValidationError("sweep.template", "no run named '" + spec.sweep_template + "'");
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::vector<std::pair<std::string, std::string>> suite_entries(const SuiteSpec& s) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("suite", s.id);
  if (s.id == "quad" || s.id == "quad_random") {
    out.emplace_back("suite.tasks", std::to_string(s.tasks));
    out.emplace_back("suite.dim", std::to_string(s.dim));
  }
  if (s.id == "quad_random") {
    out.emplace_back("suite.seed", std::to_string(s.seed));
    out.emplace_back("suite.condition", format_double(s.condition));
  }
  if (s.id == "quad") {
    for (std::size_t i = 0; i < s.quad.hessians.size(); ++i) {
      const std::string n = std::to_string(i + 1);
      const Matrix& a = s.quad.hessians[i];
      Vector flat(a.size());
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) flat[r * a.cols() + c] = a(r, c);
      out.emplace_back("suite.A." + n, list_text(flat));
      out.emplace_back("suite.center." + n, list_text(s.quad.centers[i]));
      out.emplace_back("suite.offset." + n, format_double(s.quad.offsets[i]));
    }
  }
  if (s.scales.size() != 0) out.emplace_back("suite.scales", list_text(s.scales));
  return out;
}

std::vector<std::pair<std::string, std::string>> run_entries(const RunConfig& r) {
  std::vector<std::pair<std::string, std::string>> out;
  const BilevelConfig& b = r.bilevel;
  out.emplace_back("method", to_string(r.method));
  out.emplace_back("steps", std::to_string(r.steps));
  out.emplace_back("lambda", format_double(b.lambda));
  out.emplace_back("alpha", format_double(b.alpha));
  if (r.w_learning_rate) out.emplace_back("alpha_w", format_double(*r.w_learning_rate));
  out.emplace_back("beta", format_double(b.beta));
  out.emplace_back("beta_mode", inner_rule_text(b.inner_rule));
  out.emplace_back("inner_steps", std::to_string(b.inner_steps));
  out.emplace_back("inner_schedule", schedule_text(b.inner_schedule));
  out.emplace_back("inner_growth", format_double(b.inner_growth));
  out.emplace_back("tau", to_string(b.upper.tau));
  out.emplace_back("gamma", format_double(b.upper.soft_abs.gamma));
  out.emplace_back("normalization", to_string(b.normalization));
  out.emplace_back("epoch_length", std::to_string(r.epoch_length));
  out.emplace_back("stepper", to_string(r.x_stepper));
  out.emplace_back("stepper_w", to_string(r.w_stepper));
  if (r.x0.size() != 0) out.emplace_back("x0", list_text(r.x0));
  if (r.w0.size() != 0) out.emplace_back("w0", list_text(r.w0));
  if (r.ls_weights) out.emplace_back("ls_weights", list_text(r.ls_weights->values()));
  out.emplace_back("record_every", std::to_string(r.record_every));
  out.emplace_back("seed", std::to_string(r.seed));
  out.emplace_back("init", r.random_init ? "random" : "fixed");
  out.emplace_back("init_radius", format_double(r.init_radius));
  if (!b.upper.task_order.empty()) {
    std::string t;
    for (std::size_t i = 0; i < b.upper.task_order.size(); ++i) {
      if (i) t += ", ";
      t += std::to_string(b.upper.task_order[i] + 1);
    }
    out.emplace_back("task_order", t);
  }
  out.emplace_back("loss_floor", format_double(r.loss_floor));
  out.emplace_back("correction", to_string(r.correction));
  return out;
}

std::string format_spec(const ExperimentSpec& spec) {
  std::ostringstream out;
  for (const auto& [k, v] : suite_entries(spec.suite)) out << k << " = " << v << "\n";
  out << "output_dir = " << spec.output_dir.string() << "\n";
  out << "timing_repetitions = " << spec.timing_repetitions << "\n";
  if (!spec.baseline_run.empty()) out << "baseline_run = " << spec.baseline_run << "\n";
  if (!spec.sweep_weights.empty()) out << "sweep.weights = " << list_text(spec.sweep_weights) << "\n";
  if (!spec.sweep_lambdas.empty()) out << "sweep.lambdas = " << list_text(spec.sweep_lambdas) << "\n";
  if (!spec.sweep_template.empty()) out << "sweep.template = " << spec.sweep_template << "\n";
  for (const RunConfig& r : spec.runs) {
    out << "\n[run." << r.name << "]\n";
    for (const auto& [k, v] : run_entries(r)) out << k << " = " << v << "\n";
  }
  return out.str();
}

void save_spec(const ExperimentSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << format_spec(spec);
  if (!out) throw ConfigError("failed writing config file " + path.string());
}

void apply_seed(ExperimentSpec& spec, std::uint64_t seed) {
  spec.suite.seed = seed;
  for (RunConfig& r : spec.runs) r.seed = seed;
}

}  // namespace ldc::harness

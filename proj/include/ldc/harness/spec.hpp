#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ldc/solvers.hpp"
#include "ldc/task_suites.hpp"

namespace ldc::harness {

/// Syntax problem in a config file; carries the 1-based line number.
class SpecParseError : public ConfigError {
 public:
  SpecParseError(int line, const std::string& msg)
      : ConfigError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Semantic problem in a config; carries the dotted field path (e.g. run.a.lambda).
class SpecValidationError : public ConfigError {
 public:
  SpecValidationError(const std::string& field, const std::string& msg)
      : ConfigError(field + ": " + msg), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct SuiteSpec {
  std::string id = "toy2";  // toy2 | quad | quad_random | quad_pair
  int tasks = 2;
  int dim = 2;
  QuadSpec quad;            // id == quad
  std::uint64_t seed = 0;   // id == quad_random
  double condition = 4.0;   // id == quad_random
  Vector scales;            // optional per-task loss scales
};

struct ExperimentSpec {
  SuiteSpec suite;
  std::vector<RunConfig> runs;
  std::filesystem::path output_dir = "out";
  int timing_repetitions = 1;
  std::string baseline_run;
  std::vector<double> sweep_weights;  // LS weight on task 1 (K = 2)
  std::vector<double> sweep_lambdas;
  std::string sweep_template;         // run whose settings the LS sweep reuses
};

SuitePtr build_suite(const SuiteSpec& spec);

/// Parses and validates config text.
ExperimentSpec parse_spec(const std::string& text);
ExperimentSpec load_spec(const std::filesystem::path& path);

/// Canonical text form. Doubles use the shortest round-trip representation,
/// so parse_spec(format_spec(s)) reproduces every value bit for bit.
std::string format_spec(const ExperimentSpec& spec);
void save_spec(const ExperimentSpec& spec, const std::filesystem::path& path);

/// Resolved key/value listing of one run section, in file order.
std::vector<std::pair<std::string, std::string>> run_entries(const RunConfig& run);
std::vector<std::pair<std::string, std::string>> suite_entries(const SuiteSpec& suite);

/// Overrides the suite seed and every run seed.
void apply_seed(ExperimentSpec& spec, std::uint64_t seed);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace ldc::harness

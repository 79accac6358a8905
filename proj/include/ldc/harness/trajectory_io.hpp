#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ldc/solvers.hpp"

namespace ldc::harness {

/// Column order of a trajectory file, for K tasks and dimension d:
///   step, l1..lK (raw), nl1..nlK (normalized), sigma1..sigmaK, b1..bK (baselines),
///   x1..xd, w1..wK (logits), f, g, phi, residual, gwg_norm, gwg_zn_norm,
///   norm_ratio, norm_ratio_capped, diverged, step_micros
/// gwg_zn_norm is empty outside the double loop. step_micros stays last so
/// byte comparisons can drop it.
std::vector<std::string> trajectory_columns(int tasks, int dim);

class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::filesystem::path& path, int tasks, int dim);
  void write(const TrajectoryRecord& r);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  int tasks_;
  int dim_;
};

struct Trajectory {
  std::filesystem::path path;
  std::string name;  // file stem
  int tasks = 0;
  int dim = 0;
  std::vector<TrajectoryRecord> rows;
  nlohmann::json meta;  // sidecar contents, null when absent
};

/// Reads a trajectory CSV and, if present, its .meta.json sidecar.
Trajectory read_trajectory(const std::filesystem::path& path);

std::filesystem::path meta_path(const std::filesystem::path& trajectory);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace ldc::harness

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ldc/harness/trajectory_io.hpp"

namespace ldc::harness {

enum class PlotKind { loss_space, weights_over_time, residual_over_time, timing_bars };

std::string to_string(PlotKind k);
/// Throws ConfigError listing the valid kinds.
PlotKind parse_plot_kind(const std::string& name);

/// Writes whitespace-separated .dat files into `out_dir` and, with `svg`,
/// one <kind>.svg overlaying all inputs. Returns the written paths.
///
///   loss_space          <name>.loss_space.dat          l1 .. lK (raw), step order
///   weights_over_time   <name>.weights_over_time.dat   step sigma1 .. sigmaK
///   residual_over_time  <name>.residual_over_time.dat  step residual
///   timing_bars         timing_bars.dat                method median_step_micros ratio_to_ls
///
/// timing_bars groups inputs by method (from the sidecar metadata) and takes
/// the median of their per-run step timings; ratio_to_ls is nan without an ls run.
std::vector<std::filesystem::path> emit_plot_data(const std::vector<Trajectory>& trajectories, PlotKind kind,
                                                  const std::filesystem::path& out_dir, bool svg);

}  // namespace ldc::harness

#pragma once

#include <string>

#include "ldc/types.hpp"

namespace ldc {

enum class NormalizationMode { none, log, rescale };

std::string to_string(NormalizationMode mode);
/// Throws ConfigError on an unknown name.
NormalizationMode parse_normalization(const std::string& name);

/// Per-task loss baselines.
///   rescale: l~_i = l_i / b_i, b_i captured once at step 0.
///   log:     l~_i = log(max(l_i, floor) / b_i), b_i refreshed every epoch.
/// Baselines store max(|l_i|, floor), so a negative starting loss never
/// flips the sign of a task's objective.
struct NormalizationState {
  NormalizationMode mode = NormalizationMode::none;
  Vector baseline;
  long epoch_length = 50;
  double floor = 1e-12;
  bool captured = false;
};

NormalizationState make_normalization(NormalizationMode mode, int tasks, long epoch_length = 50,
                                      double floor = 1e-12);

/// Returns the state to use at `step`: rescale freezes the first capture,
/// log refreshes whenever step % epoch_length == 0, none keeps all-ones.
NormalizationState capture_baseline(const Vector& current_losses, NormalizationState state,
                                    long step);

struct NormalizedLosses {
  Vector losses;
  Matrix grads;
};

NormalizedLosses normalize(const Vector& raw_losses, const Matrix& raw_grads,
                           const NormalizationState& state);
Vector normalize_losses(const Vector& raw_losses, const NormalizationState& state);

/// Inverse of the loss map (for log mode this recovers max(l, floor)).
Vector denormalize_losses(const Vector& normalized, const NormalizationState& state);

}  // namespace ldc

#include "ldc/normalization.hpp"

#include <cmath>

namespace ldc {

std::string to_string(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::none: return "none";
    case NormalizationMode::log: return "log";
    case NormalizationMode::rescale: return "rescale";
  }
  return "none";
}

NormalizationMode parse_normalization(const std::string& name) {
  if (name == "none") return NormalizationMode::none;
  if (name == "log") return NormalizationMode::log;
  if (name == "rescale") return NormalizationMode::rescale;
  throw ConfigError("unknown normalization '" + name + "' (expected none, log or rescale)");
}

NormalizationState make_normalization(NormalizationMode mode, int tasks, long epoch_length,
                                      double floor) {
  if (tasks < 1) throw InvalidInput("normalization needs at least one task");
  if (epoch_length < 1) throw ConfigError("epoch_length must be >= 1");
  if (!(floor > 0.0)) throw ConfigError("loss floor must be positive");
  NormalizationState s;
  s.mode = mode;
  s.baseline = Vector::Ones(tasks);
  s.epoch_length = epoch_length;
  s.floor = floor;
  return s;
}

NormalizationState capture_baseline(const Vector& current_losses, NormalizationState state,
                                    long step) {
  if (step < 0) throw InvalidInput("step must be >= 0");
  if (current_losses.size() != state.baseline.size()) {
    throw InvalidInput("capture_baseline: loss count does not match the state");
  }
  bool refresh = false;
  switch (state.mode) {
    case NormalizationMode::none: return state;
    case NormalizationMode::rescale: refresh = !state.captured; break;
    case NormalizationMode::log: refresh = !state.captured || step % state.epoch_length == 0; break;
  }
  if (refresh) {
    state.baseline = current_losses.cwiseAbs().cwiseMax(state.floor);
    state.captured = true;
  }
  return state;
}

Vector normalize_losses(const Vector& raw, const NormalizationState& state) {
  switch (state.mode) {
    case NormalizationMode::none: return raw;
    case NormalizationMode::rescale: return raw.cwiseQuotient(state.baseline);
    case NormalizationMode::log:
      return (raw.cwiseMax(state.floor).cwiseQuotient(state.baseline)).array().log().matrix();
  }
  return raw;
}

NormalizedLosses normalize(const Vector& raw, const Matrix& grads, const NormalizationState& state) {
  if (raw.size() != state.baseline.size() || grads.rows() != raw.size()) {
    throw InvalidInput("normalize: shape mismatch between losses, gradients and state");
  }
  switch (state.mode) {
    case NormalizationMode::none: return {raw, grads};
    case NormalizationMode::rescale:
      return {raw.cwiseQuotient(state.baseline), state.baseline.cwiseInverse().asDiagonal() * grads};
    case NormalizationMode::log: {
      const Vector clamped = raw.cwiseMax(state.floor);
      return {clamped.cwiseQuotient(state.baseline).array().log().matrix(),
              clamped.cwiseInverse().asDiagonal() * grads};
    }
  }
  return {raw, grads};
}

Vector denormalize_losses(const Vector& normalized, const NormalizationState& state) {
  switch (state.mode) {
    case NormalizationMode::none: return normalized;
    case NormalizationMode::rescale: return normalized.cwiseProduct(state.baseline);
    case NormalizationMode::log: return normalized.array().exp().matrix().cwiseProduct(state.baseline);
  }
  return normalized;
}

}  // namespace ldc

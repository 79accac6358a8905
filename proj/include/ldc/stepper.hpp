#pragma once

#include <string>

#include "ldc/types.hpp"

namespace ldc {

enum class StepperKind { gd, adam };

std::string to_string(StepperKind kind);
StepperKind parse_stepper(const std::string& name);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First-order update rule for one variable block. Adam keeps bias-corrected
/// moment estimates, zero-initialized with the shape of the variable.
class Stepper {
 public:
  Stepper() = default;
  Stepper(StepperKind kind, double learning_rate, Eigen::Index size, AdamParams adam = {});

  /// var <- var - update(grad)
  void apply(Vector& var, const Vector& grad);

  StepperKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  long steps_taken() const { return t_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  StepperKind kind_ = StepperKind::gd;
  double lr_ = 1e-3;
  AdamParams adam_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace ldc

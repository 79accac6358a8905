#include "ldc/stepper.hpp"

#include <cmath>

namespace ldc {

std::string to_string(StepperKind kind) { return kind == StepperKind::adam ? "adam" : "gd"; }

StepperKind parse_stepper(const std::string& name) {
  if (name == "gd") return StepperKind::gd;
  if (name == "adam") return StepperKind::adam;
  throw ConfigError("unknown stepper '" + name + "' (expected gd or adam)");
}

Stepper::Stepper(StepperKind kind, double learning_rate, Eigen::Index size, AdamParams adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (kind_ == StepperKind::adam) {
    m_ = Vector::Zero(size);
    v_ = Vector::Zero(size);
  }
}

void Stepper::apply(Vector& var, const Vector& grad) {
  if (grad.size() != var.size()) throw InvalidInput("stepper: gradient shape mismatch");
  ++t_;
  if (kind_ == StepperKind::gd) {
    var -= lr_ * grad;
    return;
  }
  if (m_.size() != var.size()) throw InvalidInput("stepper: moment shape mismatch");
  m_ = adam_.beta1 * m_ + (1.0 - adam_.beta1) * grad;
  v_ = adam_.beta2 * v_ + (1.0 - adam_.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
  var.array() -= lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + adam_.eps);
}

}  // namespace ldc

#pragma once

#include <functional>

#include "ldc/types.hpp"

namespace ldc {

/// A point on the probability simplex: nonnegative entries summing to one.
class SimplexWeights {
 public:
  static constexpr double kSumTolerance = 1e-9;

  SimplexWeights() = default;
  /// Validates and wraps `w`; throws InvalidInput if it is off the simplex.
  explicit SimplexWeights(Vector w);

  /// Uniform weights 1/K.
  static SimplexWeights uniform(int k);
  /// The k-th vertex e_i.
  static SimplexWeights vertex(int k, int i);

  const Vector& values() const { return w_; }
  int size() const { return static_cast<int>(w_.size()); }
  double operator[](int i) const { return w_[i]; }

  static bool is_on_simplex(const Vector& w, double tol = kSumTolerance);

 private:
  Vector w_;
};

struct SoftAbsParams {
  static constexpr double kTrainingGamma = 1e-8;
  static constexpr double kGradCheckGamma = 1e-4;

  double gamma = kTrainingGamma;

  /// Throws InvalidInput unless gamma > 0 and finite.
  void validate() const;
};

/// Max-shifted softmax. Throws InvalidInput on empty or non-finite logits.
SimplexWeights softmax(const Vector& logits);

/// J = diag(s) - s s^T for s = softmax(logits).
Matrix softmax_jacobian(const Vector& logits);

/// Computes J^T v = J v = s .* (v - <s, v>) without forming J.
Vector softmax_jacobian_apply(const Vector& sigma, const Vector& v);

/// sqrt(d^2 + gamma)
double soft_abs(double d, const SoftAbsParams& p);
/// d / sqrt(d^2 + gamma), always in (-1, 1).
double soft_abs_grad(double d, const SoftAbsParams& p);

/// Euclidean projection onto the probability simplex (sort-and-threshold).
SimplexWeights project_simplex(const Vector& v);

using ScalarFn = std::function<double(const Vector&)>;

/// Central differences (fn(x + h e_i) - fn(x - h e_i)) / 2h, one coordinate
/// at a time. Throws EvaluationError carrying the coordinate index when fn
/// returns a non-finite value.
Vector finite_diff_grad(const ScalarFn& fn, const Vector& x, double h);

}  // namespace ldc

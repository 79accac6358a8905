#include "ldc/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace ldc {

SimplexWeights::SimplexWeights(Vector w) : w_(std::move(w)) {
  if (!is_on_simplex(w_)) {
    throw InvalidInput("weights are not on the probability simplex");
  }
}

SimplexWeights SimplexWeights::uniform(int k) {
  if (k < 1) throw InvalidInput("simplex dimension must be >= 1");
  return SimplexWeights(Vector::Constant(k, 1.0 / k));
}

SimplexWeights SimplexWeights::vertex(int k, int i) {
  if (k < 1 || i < 0 || i >= k) throw InvalidInput("vertex index out of range");
  Vector w = Vector::Zero(k);
  w[i] = 1.0;
  return SimplexWeights(std::move(w));
}

bool SimplexWeights::is_on_simplex(const Vector& w, double tol) {
  if (w.size() < 1 || !w.allFinite()) return false;
  if ((w.array() < 0.0).any()) return false;
  return std::abs(w.sum() - 1.0) <= tol;
}

void SoftAbsParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidInput("soft-abs gamma must be a positive finite number");
  }
}

namespace {

void require_finite(const Vector& v, const char* what) {
  if (v.size() < 1) throw InvalidInput(std::string(what) + ": empty input");
  if (!v.allFinite()) throw InvalidInput(std::string(what) + ": non-finite input");
}

Vector softmax_values(const Vector& logits) {
  require_finite(logits, "softmax");
  const double shift = logits.maxCoeff();
  Vector e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

}  // namespace

SimplexWeights softmax(const Vector& logits) {
  Vector s = softmax_values(logits);
  // exp(0) = 1 is always present, so the sum is in [1, K] and s is on the
  // simplex up to rounding.
  return SimplexWeights(std::move(s));
}

Matrix softmax_jacobian(const Vector& logits) {
  const Vector s = softmax_values(logits);
  Matrix j = -s * s.transpose();
  j.diagonal() += s;
  return j;
}

Vector softmax_jacobian_apply(const Vector& sigma, const Vector& v) {
  const double mean = sigma.dot(v);
  return (sigma.array() * (v.array() - mean)).matrix();
}

double soft_abs(double d, const SoftAbsParams& p) { return std::sqrt(d * d + p.gamma); }

double soft_abs_grad(double d, const SoftAbsParams& p) { return d / std::sqrt(d * d + p.gamma); }

SimplexWeights project_simplex(const Vector& v) {
  require_finite(v, "project_simplex");
  const int k = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + k);
  std::sort(u.begin(), u.end(), std::greater<>());

  double cumsum = 0.0;
  double theta = 0.0;
  for (int i = 0; i < k; ++i) {
    cumsum += u[i];
    const double t = (cumsum - 1.0) / (i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  Vector w = (v.array() - theta).max(0.0).matrix();
  // renormalize away the rounding left by the threshold
  w /= w.sum();
  return SimplexWeights(std::move(w));
}

Vector finite_diff_grad(const ScalarFn& fn, const Vector& x, double h) {
  if (!(h > 0.0)) throw InvalidInput("finite-difference step must be positive");
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    probe[i] = xi + h;
    const double up = fn(probe);
    probe[i] = xi - h;
    const double down = fn(probe);
    probe[i] = xi;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw EvaluationError("non-finite function value at coordinate " + std::to_string(i),
                            static_cast<int>(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace ldc

#include "ldc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ldc/kernels.hpp"
#include "ldc/min_norm.hpp"

namespace ldc {

double delta_m(const Vector& multi, const Vector& single, const MetricDirections& dirs) {
  const Eigen::Index k = single.size();
  if (k < 1 || multi.size() != k || static_cast<Eigen::Index>(dirs.size()) != k) {
    throw InvalidInput("delta_m: metric, baseline and direction counts must match");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (single[i] == 0.0) throw InvalidInput("delta_m: zero single-task baseline");
    const double rel = (multi[i] - single[i]) / single[i];
    total += dirs[static_cast<std::size_t>(i)] == Direction::higher_better ? -rel : rel;
  }
  return total / static_cast<double>(k) * 100.0;
}

double pareto_residual(const Matrix& grads) { return min_norm_weights(grads).residual; }

LossStats loss_stats(const Vector& losses) {
  if (losses.size() < 1) throw InvalidInput("loss_stats: empty input");
  LossStats s;
  s.mean = losses.mean();
  s.std = std::sqrt((losses.array() - s.mean).square().mean());
  s.min = losses.minCoeff();
  s.max = losses.maxCoeff();
  return s;
}

Matrix grad_cosine_matrix(const Matrix& grads) {
  const Matrix m = kernels::gram(grads);
  const Eigen::Index k = grads.rows();
  const Vector norms = m.diagonal().cwiseMax(0.0).cwiseSqrt();
  Matrix c = Matrix::Zero(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (norms[a] < 1e-15) continue;
    for (Eigen::Index b = 0; b < k; ++b) {
      if (norms[b] < 1e-15) continue;
      c(a, b) = a == b ? 1.0 : std::clamp(m(a, b) / (norms[a] * norms[b]), -1.0, 1.0);
    }
  }
  return c;
}

NormRatio norm_ratio(const Vector& num, const Vector& den) {
  const double d = den.norm();
  NormRatio r;
  r.capped = d < kNormRatioFloor;
  r.value = num.norm() / std::max(d, kNormRatioFloor);
  return r;
}

bool dominates(const Vector& a, const Vector& b, double tol) {
  if (a.size() != b.size()) throw InvalidInput("dominates: size mismatch");
  bool strict = false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] > b[i] + tol) return false;
    if (a[i] < b[i] - tol) strict = true;
  }
  return strict;
}

}  // namespace ldc

#include "ldc/kernels.hpp"

#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ldc::kernels {

namespace {

void check_shapes(const Matrix& grads, const Vector& coeffs) {
  if (grads.rows() != coeffs.size()) {
    throw InvalidInput("combine_rows: " + std::to_string(grads.rows()) + " gradient rows but " +
                       std::to_string(coeffs.size()) + " coefficients");
  }
}

// fixed-order accumulation shared by both variants
inline double column_combination(const Matrix& grads, const Vector& coeffs, Eigen::Index j) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < grads.rows(); ++i) acc += coeffs[i] * grads(i, j);
  return acc;
}

inline double row_dot(const Matrix& grads, Eigen::Index a, Eigen::Index b) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < grads.cols(); ++j) acc += grads(a, j) * grads(b, j);
  return acc;
}

}  // namespace

Vector combine_rows_serial(const Matrix& grads, const Vector& coeffs) {
  check_shapes(grads, coeffs);
  Vector out(grads.cols());
  for (Eigen::Index j = 0; j < grads.cols(); ++j) out[j] = column_combination(grads, coeffs, j);
  return out;
}

Vector combine_rows(const Matrix& grads, const Vector& coeffs) {
  check_shapes(grads, coeffs);
  const Eigen::Index cols = grads.cols();
  Vector out(cols);
  [[maybe_unused]] const bool parallel = grads.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index j = 0; j < cols; ++j) out[j] = column_combination(grads, coeffs, j);
  return out;
}

Matrix gram_serial(const Matrix& grads) {
  const Eigen::Index k = grads.rows();
  Matrix m(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      m(a, b) = row_dot(grads, a, b);
      m(b, a) = m(a, b);
    }
  }
  return m;
}

Matrix gram(const Matrix& grads) {
  const Eigen::Index k = grads.rows();
  Matrix m(k, k);
  [[maybe_unused]] const bool parallel = k * k * grads.cols() >= kParallelWork;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      const double v = row_dot(grads, a, b);
      m(a, b) = v;
      m(b, a) = v;
    }
  }
  return m;
}

Vector finite_diff_grad_parallel(const ScalarFn& fn, const Vector& x, double h) {
  if (!(h > 0.0)) throw InvalidInput("finite-difference step must be positive");
  const Eigen::Index n = x.size();
  Vector grad(n);
  int bad_coordinate = -1;
#pragma omp parallel
  {
    Vector probe = x;
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      probe[i] = x[i] + h;
      const double up = fn(probe);
      probe[i] = x[i] - h;
      const double down = fn(probe);
      probe[i] = x[i];
      if (!std::isfinite(up) || !std::isfinite(down)) {
#pragma omp critical
        if (bad_coordinate < 0 || i < bad_coordinate) bad_coordinate = static_cast<int>(i);
      }
      grad[i] = (up - down) / (2.0 * h);
    }
  }
  if (bad_coordinate >= 0) {
    throw EvaluationError(
        "non-finite function value at coordinate " + std::to_string(bad_coordinate),
        bad_coordinate);
  }
  return grad;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace ldc::kernels

#pragma once

#include <vector>

#include "ldc/types.hpp"

namespace ldc {

enum class Direction { higher_better, lower_better };

/// One direction flag per metric column.
using MetricDirections = std::vector<Direction>;

/// Average signed relative change of multi-task metrics against single-task
/// baselines, in percent:
///   (1/K) sum_k (-1)^{delta_k} (M_m,k - M_b,k) / M_b,k * 100,
/// delta_k = 1 for higher-is-better columns. Negative means the multi-task
/// model is better on average. Throws InvalidInput on length mismatch or a
/// zero baseline entry.
double delta_m(const Vector& multi, const Vector& single, const MetricDirections& dirs);

/// min_{w in simplex} ||G^T w||^2.
double pareto_residual(const Matrix& grads);

/// Population statistics over per-task losses.
struct LossStats {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

LossStats loss_stats(const Vector& losses);

/// Pairwise cosine similarity of gradient rows; rows with norm below 1e-15
/// get 0 everywhere, including the diagonal.
Matrix grad_cosine_matrix(const Matrix& grads);

inline constexpr double kNormRatioFloor = 1e-15;

struct NormRatio {
  double value = 0.0;
  bool capped = false;  // denominator was below kNormRatioFloor
};

/// ||num|| / max(||den||, 1e-15).
NormRatio norm_ratio(const Vector& grad_w_g_at_x, const Vector& grad_w_g_at_zn);

/// a dominates b: a_i <= b_i + tol for all i and a_j < b_j - tol for some j.
bool dominates(const Vector& a, const Vector& b, double tol = 0.0);

}  // namespace ldc

#include "ldc/min_norm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ldc/kernels.hpp"

namespace ldc {

double two_task_min_norm(double g11, double g12, double g22) {
  // d/dw ||w g1 + (1-w) g2||^2 = 0  ->  w = (g22 - g12) / (g11 + g22 - 2 g12)
  const double curvature = g11 + g22 - 2.0 * g12;
  if (curvature <= 0.0) return 0.5;  // g1 == g2: every w is optimal
  return std::clamp((g22 - g12) / curvature, 0.0, 1.0);
}

namespace {

MinNormResult frank_wolfe(const Matrix& m, const MinNormOptions& opts) {
  const Eigen::Index k = m.rows();
  Eigen::Index start = 0;
  m.diagonal().minCoeff(&start);
  Vector w = Vector::Zero(k);
  w[start] = 1.0;
  Vector mw = m.col(start);

  MinNormResult out;
  double gap = 0.0;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const double q = w.dot(mw);
    Eigen::Index fw = 0;
    mw.minCoeff(&fw);
    gap = q - mw[fw];
    if (gap <= opts.gap_tolerance) break;

    Eigen::Index away = -1;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (w[i] > 0.0 && (away < 0 || mw[i] > mw[away])) away = i;
    }
    const double away_gap = mw[away] - q;

    if (gap >= away_gap) {
      // toward vertex fw: d = e_fw - w
      const double slope = mw[fw] - q;
      const double curv = m(fw, fw) - 2.0 * mw[fw] + q;
      const double step = curv > 0.0 ? std::clamp(-slope / curv, 0.0, 1.0) : 1.0;
      w *= (1.0 - step);
      w[fw] += step;
      mw = (1.0 - step) * mw + step * m.col(fw);
    } else {
      // away from vertex `away`: d = w - e_away
      const double wa = w[away];
      const double max_step = wa < 1.0 ? wa / (1.0 - wa) : std::numeric_limits<double>::infinity();
      const double slope = q - mw[away];
      const double curv = q - 2.0 * mw[away] + m(away, away);
      double step = curv > 0.0 ? -slope / curv : max_step;
      step = std::clamp(step, 0.0, max_step);
      w *= (1.0 + step);
      w[away] -= step;
      if (step == max_step) w[away] = 0.0;
      mw = (1.0 + step) * mw - step * m.col(away);
    }
    w = w.cwiseMax(0.0);
    w /= w.sum();
  }
  out.iterations = it;
  out.gap = gap;
  out.weights = SimplexWeights(std::move(w));
  return out;
}

MinNormResult projected_gradient(const Matrix& m, const MinNormOptions& opts) {
  const Eigen::Index k = m.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues()[k - 1];
  const double eta = lmax > 0.0 ? 1.0 / lmax : 1.0;
  // accelerated projected gradient, momentum reset whenever the objective rises
  Vector w = Vector::Constant(k, 1.0 / static_cast<double>(k));
  Vector y = w;
  double t = 1.0;
  double prev = w.dot(m * w);
  MinNormResult out;
  int it = 0;
  double gap = 0.0;
  for (; it < opts.max_iterations; ++it) {
    const Vector mw = m * w;
    gap = w.dot(mw) - mw.minCoeff();
    if (gap <= opts.gap_tolerance) break;
    Vector next = project_simplex(y - eta * (m * y)).values();
    const double val = next.dot(m * next);
    if (val > prev) {
      t = 1.0;
      y = w;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - w);
    w = std::move(next);
    t = t_next;
    prev = val;
  }
  out.iterations = it;
  out.gap = gap;
  out.weights = SimplexWeights(std::move(w));
  return out;
}

}  // namespace

MinNormResult min_norm_from_gram(const Matrix& gram, const MinNormOptions& opts) {
  const Eigen::Index k = gram.rows();
  if (k < 1 || gram.cols() != k) throw InvalidInput("min-norm: Gram matrix must be square and non-empty");
  if (!gram.allFinite()) throw InvalidInput("min-norm: non-finite Gram matrix");

  MinNormResult out;
  if (k == 1) {
    out.weights = SimplexWeights::uniform(1);
  } else if (k == 2 && opts.two_task_closed_form) {
    const double w1 = two_task_min_norm(gram(0, 0), gram(0, 1), gram(1, 1));
    Vector w(2);
    w << w1, 1.0 - w1;
    out.weights = SimplexWeights(std::move(w));
  } else if (opts.method == MinNormMethod::projected_gradient) {
    out = projected_gradient(gram, opts);
  } else {
    out = frank_wolfe(gram, opts);
  }
  const Vector& w = out.weights.values();
  out.residual = std::max(0.0, w.dot(gram * w));
  return out;
}

MinNormResult min_norm_weights(const Matrix& grads, const MinNormOptions& opts) {
  if (grads.rows() < 1) throw InvalidInput("min-norm: need at least one gradient");
  MinNormResult out = min_norm_from_gram(kernels::gram(grads), opts);
  out.residual = kernels::combine_rows(grads, out.weights.values()).squaredNorm();
  return out;
}

}  // namespace ldc

#pragma once

// Independent reference computations. Deliberately written with scalar loops
// and no calls into the library so a shared bug cannot hide.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// --- toy problem, term by term -------------------------------------------

struct ToyLosses {
  double l1, l2;
};

inline ToyLosses toy_losses(double x1, double x2) {
  const double f1 = std::log(std::max(std::fabs(0.5 * (-x1 - 7.0) - std::tanh(-x2)), 0.000005)) + 6.0;
  const double f2 = std::log(std::max(std::fabs(0.5 * (-x1 + 3.0) - std::tanh(-x2) + 2.0), 0.000005)) + 6.0;
  const double g1 = ((-x1 + 7.0) * (-x1 + 7.0) + 0.1 * (-x2 - 8.0) * (-x2 - 8.0)) / 10.0 - 20.0;
  const double g2 = ((-x1 - 7.0) * (-x1 - 7.0) + 0.1 * (-x2 - 8.0) * (-x2 - 8.0)) / 10.0 - 20.0;
  const double c1 = std::max(std::tanh(0.5 * x2), 0.0);
  const double c2 = std::max(std::tanh(-0.5 * x2), 0.0);
  return {0.1 * (c1 * f1 + c2 * g1), c1 * f2 + c2 * g2};
}

// --- relative performance change ------------------------------------------

inline double delta_m(const std::vector<double>& multi, const std::vector<double>& single,
                      const std::vector<bool>& higher_better) {
  double s = 0.0;
  for (std::size_t i = 0; i < multi.size(); ++i) {
    const double sign = higher_better[i] ? -1.0 : 1.0;
    s += sign * (multi[i] - single[i]) / single[i];
  }
  return s / static_cast<double>(multi.size()) * 100.0;
}

// --- min-norm by grid search ----------------------------------------------

inline double quad_form(const Eigen::MatrixXd& gram, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a)
    for (std::size_t b = 0; b < w.size(); ++b) s += w[a] * w[b] * gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return s;
}

inline Eigen::MatrixXd gram_of(const Eigen::MatrixXd& g) {
  const Eigen::Index k = g.rows();
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < g.cols(); ++j) s += g(a, j) * g(b, j);
      m(a, b) = s;
    }
  return m;
}

// min over the simplex of w^T M w for K = 2 or 3: a 1e-3 grid followed by
// a finer grid around the best cell.
inline double grid_min_norm(const Eigen::MatrixXd& gram) {
  const int k = static_cast<int>(gram.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_w;
  auto scan = [&](std::vector<double> lo, double span, int steps) {
    const double h = span / steps;
    if (k == 2) {
      for (int i = 0; i <= steps; ++i) {
        const double a = std::clamp(lo[0] + i * h, 0.0, 1.0);
        std::vector<double> w{a, 1.0 - a};
        const double v = quad_form(gram, w);
        if (v < best) best = v, best_w = w;
      }
    } else {
      for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
          const double a = std::clamp(lo[0] + i * h, 0.0, 1.0);
          const double b = std::clamp(lo[1] + j * h, 0.0, 1.0);
          if (a + b > 1.0) continue;
          std::vector<double> w{a, b, 1.0 - a - b};
          const double v = quad_form(gram, w);
          if (v < best) best = v, best_w = w;
        }
    }
  };
  scan(std::vector<double>(2, 0.0), 1.0, 1000);
  for (double span : {4e-3, 4e-5, 4e-7}) {
    std::vector<double> lo{best_w[0] - span / 2, best_w[1] - span / 2};
    scan(lo, span, k == 2 ? 400 : 80);
  }
  return best;
}

// --- simplex projection via KKT support enumeration (K <= 4) ---------------

inline std::vector<double> project_simplex(const std::vector<double>& v) {
  const int k = static_cast<int>(v.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> out;
  for (int mask = 1; mask < (1 << k); ++mask) {
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < k; ++i)
      if (mask & (1 << i)) sum += v[i], ++n;
    const double theta = (sum - 1.0) / n;
    std::vector<double> w(k, 0.0);
    bool ok = true;
    for (int i = 0; i < k; ++i)
      if (mask & (1 << i)) {
        w[i] = v[i] - theta;
        if (w[i] < 0.0) ok = false;
      }
    if (!ok) continue;
    double d = 0.0;
    for (int i = 0; i < k; ++i) d += (w[i] - v[i]) * (w[i] - v[i]);
    if (d < best) best = d, out = w;
  }
  return out;
}

// --- one single-loop step for K = 2 with GD steppers -----------------------

struct TwoTaskStep {
  std::vector<double> x;
  std::array<double, 2> w;
};

// l_i(x) = 1/2 (x - a_i)^T A_i (x - a_i), no normalization, identity order.
inline TwoTaskStep ldc_two_task_step(const std::array<Eigen::MatrixXd, 2>& a, const std::array<std::vector<double>, 2>& c,
                                     const std::vector<double>& x, std::array<double, 2> w, double lambda,
                                     double alpha, double gamma, bool tau_sigma) {
  const std::size_t d = x.size();
  double l[2];
  std::vector<double> grad[2];
  for (int i = 0; i < 2; ++i) {
    grad[i].assign(d, 0.0);
    double q = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double row = 0.0;
      for (std::size_t s = 0; s < d; ++s) row += a[i](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) * (x[s] - c[i][s]);
      grad[i][r] = row;
      q += (x[r] - c[i][r]) * row;
    }
    l[i] = 0.5 * q;
  }
  const double m = std::max(w[0], w[1]);
  const double e1 = std::exp(w[0] - m), e2 = std::exp(w[1] - m);
  const double s1 = e1 / (e1 + e2), s2 = e2 / (e1 + e2);
  const double t1 = tau_sigma ? s1 : 1.0, t2 = tau_sigma ? s2 : 1.0;
  const double diff = t1 * l[0] - t2 * l[1];
  const double sp = diff / std::sqrt(diff * diff + gamma);
  const double p = s1 * s2;  // d s1/d w1 = p, d s1/d w2 = -p, d s2/d w1 = -p, d s2/d w2 = p

  TwoTaskStep out;
  out.x.resize(d);
  for (std::size_t r = 0; r < d; ++r) {
    const double fx = sp * (t1 * grad[0][r] - t2 * grad[1][r]);
    const double gx = s1 * grad[0][r] + s2 * grad[1][r];
    out.x[r] = x[r] - alpha * (fx + lambda * gx);
  }
  const double fw1 = tau_sigma ? sp * (p * l[0] + p * l[1]) : 0.0;
  const double fw2 = tau_sigma ? sp * (-p * l[0] - p * l[1]) : 0.0;
  const double gw1 = p * (l[0] - l[1]);
  const double gw2 = p * (l[1] - l[0]);
  out.w = {w[0] - alpha * (fw1 + lambda * gw1), w[1] - alpha * (fw2 + lambda * gw2)};
  return out;
}

}  // namespace oracle

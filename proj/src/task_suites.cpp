#include "ldc/task_suites.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "ldc/kernels.hpp"

namespace ldc {

Vector TaskSuite::lower_level_solution(const SimplexWeights&) const {
  throw ConfigError("suite '" + id() + "' has no closed-form lower-level solution");
}

void TaskSuite::check_point(const Vector& x) const {
  if (x.size() != dim()) {
    throw InvalidInput("suite '" + id() + "' expects dimension " + std::to_string(dim()) +
                       ", got " + std::to_string(x.size()));
  }
}

// ---------------------------------------------------------------------------
// toy2

namespace {

struct ToyParts {
  double f1, f2, g1, g2, c1, c2;
  Eigen::Vector2d df1, df2, dg1, dg2, dc1, dc2;
};

ToyParts toy_parts(double x1, double x2) {
  ToyParts p;
  const double th = std::tanh(x2);
  const double dth = 1.0 - th * th;

  // tanh(-x2) = -tanh(x2)
  const double u1 = 0.5 * (-x1 - 7.0) + th;
  const double u2 = 0.5 * (-x1 + 3.0) + th + 2.0;
  const Eigen::Vector2d du(-0.5, dth);

  const double a1 = std::abs(u1);
  p.f1 = std::log(std::max(a1, Toy2Suite::kLogFloor)) + 6.0;
  p.df1 = a1 >= Toy2Suite::kLogFloor ? Eigen::Vector2d(du / u1) : Eigen::Vector2d::Zero();

  const double a2 = std::abs(u2);
  p.f2 = std::log(std::max(a2, Toy2Suite::kLogFloor)) + 6.0;
  p.df2 = a2 >= Toy2Suite::kLogFloor ? Eigen::Vector2d(du / u2) : Eigen::Vector2d::Zero();

  const double q = 0.1 * (-x2 - 8.0) * (-x2 - 8.0);
  p.g1 = ((-x1 + 7.0) * (-x1 + 7.0) + q) / 10.0 - 20.0;
  p.g2 = ((-x1 - 7.0) * (-x1 - 7.0) + q) / 10.0 - 20.0;
  p.dg1 = Eigen::Vector2d(0.2 * (x1 - 7.0), 0.02 * (x2 + 8.0));
  p.dg2 = Eigen::Vector2d(0.2 * (x1 + 7.0), 0.02 * (x2 + 8.0));

  const double t_pos = std::tanh(0.5 * x2);
  const double dt_pos = 0.5 * (1.0 - t_pos * t_pos);
  p.c1 = std::max(t_pos, 0.0);
  p.dc1 = t_pos >= 0.0 ? Eigen::Vector2d(0.0, dt_pos) : Eigen::Vector2d::Zero();

  const double t_neg = -t_pos;  // tanh(-0.5 x2)
  p.c2 = std::max(t_neg, 0.0);
  p.dc2 = t_neg >= 0.0 ? Eigen::Vector2d(0.0, -dt_pos) : Eigen::Vector2d::Zero();
  return p;
}

}  // namespace

Vector Toy2Suite::losses(const Vector& x) const {
  check_point(x);
  const ToyParts p = toy_parts(x[0], x[1]);
  Vector l(2);
  l[0] = 0.1 * (p.c1 * p.f1 + p.c2 * p.g1);
  l[1] = p.c1 * p.f2 + p.c2 * p.g2;
  return l;
}

Evaluation Toy2Suite::evaluate(const Vector& x) const {
  check_point(x);
  const ToyParts p = toy_parts(x[0], x[1]);
  Evaluation e{Vector(2), Matrix(2, 2)};
  e.losses[0] = 0.1 * (p.c1 * p.f1 + p.c2 * p.g1);
  e.losses[1] = p.c1 * p.f2 + p.c2 * p.g2;
  e.grads.row(0) = 0.1 * (p.f1 * p.dc1 + p.c1 * p.df1 + p.g1 * p.dc2 + p.c2 * p.dg1).transpose();
  e.grads.row(1) = (p.f2 * p.dc1 + p.c1 * p.df2 + p.g2 * p.dc2 + p.c2 * p.dg2).transpose();
  return e;
}

std::vector<Vector> Toy2Suite::reference_starts() {
  const double pts[5][2] = {{-8.5, 7.5}, {-8.5, 5.0}, {0.0, 0.0}, {9.0, 9.0}, {10.0, -8.0}};
  std::vector<Vector> out;
  for (const auto& p : pts) out.push_back(Eigen::Vector2d(p[0], p[1]));
  return out;
}

// ---------------------------------------------------------------------------
// quadratics

QuadSuite::QuadSuite(QuadSpec spec, std::string id) : spec_(std::move(spec)), id_(std::move(id)) {
  const std::size_t k = spec_.hessians.size();
  if (k < 1) throw InvalidInput("quad suite needs at least one task");
  if (spec_.centers.size() != k || spec_.offsets.size() != k) {
    throw InvalidInput("quad suite: hessians, centers and offsets must have equal counts");
  }
  dim_ = static_cast<int>(spec_.hessians[0].rows());
  if (dim_ < 1) throw InvalidInput("quad suite: dimension must be >= 1");
  max_eig_ = 0.0;
  min_eig_ = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const Matrix& a = spec_.hessians[i];
    const std::string tag = "quad suite task " + std::to_string(i + 1);
    if (a.rows() != dim_ || a.cols() != dim_) throw InvalidInput(tag + ": hessian shape mismatch");
    if (spec_.centers[i].size() != dim_) throw InvalidInput(tag + ": center shape mismatch");
    if (!a.allFinite() || !spec_.centers[i].allFinite() || !std::isfinite(spec_.offsets[i])) {
      throw InvalidInput(tag + ": non-finite entry");
    }
    if (spec_.offsets[i] < 0.0) throw InvalidInput(tag + ": offset must be >= 0");
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
      throw InvalidInput(tag + ": hessian is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()[0] <= 0.0) throw InvalidInput(tag + ": hessian is not positive definite");
    min_eig_ = std::min(min_eig_, eig.eigenvalues()[0]);
    max_eig_ = std::max(max_eig_, eig.eigenvalues()[dim_ - 1]);
  }
}

Vector QuadSuite::losses(const Vector& x) const {
  check_point(x);
  const int k = tasks();
  Vector l(k);
  for (int i = 0; i < k; ++i) {
    const Vector r = x - spec_.centers[i];
    l[i] = 0.5 * r.dot(spec_.hessians[i] * r) + spec_.offsets[i];
  }
  return l;
}

Evaluation QuadSuite::evaluate(const Vector& x) const {
  check_point(x);
  const int k = tasks();
  Evaluation e{Vector(k), Matrix(k, dim_)};
  [[maybe_unused]] const bool parallel = static_cast<long>(k) * dim_ * dim_ >= kernels::kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < k; ++i) {
    const Vector r = x - spec_.centers[i];
    const Vector g = spec_.hessians[i] * r;
    e.losses[i] = 0.5 * r.dot(g) + spec_.offsets[i];
    e.grads.row(i) = g.transpose();
  }
  return e;
}

Vector QuadSuite::lower_level_solution(const SimplexWeights& w) const {
  if (w.size() != tasks()) throw InvalidInput("quad suite: weight count mismatch");
  Matrix h = Matrix::Zero(dim_, dim_);
  Vector rhs = Vector::Zero(dim_);
  for (int i = 0; i < tasks(); ++i) {
    h += w[i] * spec_.hessians[i];
    rhs += w[i] * (spec_.hessians[i] * spec_.centers[i]);
  }
  return h.llt().solve(rhs);
}

namespace {

Matrix weighted_hessian(const QuadSpec& spec, const SimplexWeights& w) {
  Matrix h = Matrix::Zero(spec.hessians[0].rows(), spec.hessians[0].cols());
  for (std::size_t i = 0; i < spec.hessians.size(); ++i) h += w[static_cast<int>(i)] * spec.hessians[i];
  return h;
}

}  // namespace

double QuadSuite::min_curvature(const SimplexWeights& w) const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(weighted_hessian(spec_, w), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[0];
}

double QuadSuite::max_curvature(const SimplexWeights& w) const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(weighted_hessian(spec_, w), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[dim_ - 1];
}

Vector QuadSuite::front_point(double w1) const {
  if (tasks() != 2) throw ConfigError("analytic front is defined for two-task suites only");
  if (!(w1 >= 0.0 && w1 <= 1.0)) throw InvalidInput("front weight must be in [0, 1]");
  Vector w(2);
  w << w1, 1.0 - w1;
  return lower_level_solution(SimplexWeights(std::move(w)));
}

Vector QuadSuite::front_losses(double w1) const { return losses(front_point(w1)); }

double QuadSuite::distance_to_front(const Vector& loss_point) const {
  if (loss_point.size() != 2) throw InvalidInput("loss point must have two entries");
  auto dist2 = [&](double w) { return (front_losses(w) - loss_point).squaredNorm(); };
  constexpr int kScan = 2000;
  int best = 0;
  double best_val = dist2(0.0);
  for (int s = 1; s <= kScan; ++s) {
    const double v = dist2(static_cast<double>(s) / kScan);
    if (v < best_val) {
      best_val = v;
      best = s;
    }
  }
  double lo = std::max(0, best - 1) / static_cast<double>(kScan);
  double hi = std::min(kScan, best + 1) / static_cast<double>(kScan);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - phi * (hi - lo);
  double b = lo + phi * (hi - lo);
  double fa = dist2(a);
  double fb = dist2(b);
  for (int it = 0; it < 100; ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = dist2(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = dist2(b);
    }
  }
  return std::sqrt(std::min({best_val, fa, fb}));
}

std::shared_ptr<QuadSuite> random_quad_suite(int tasks, int dim, std::uint64_t seed,
                                             double condition) {
  if (tasks < 1 || dim < 1) throw InvalidInput("random quad suite needs tasks >= 1 and dim >= 1");
  if (!(condition >= 1.0)) throw InvalidInput("condition number must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  QuadSpec spec;
  for (int i = 0; i < tasks; ++i) {
    Matrix m(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) m(r, c) = normal(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(m).householderQ();
    Vector eig(dim);
    for (int r = 0; r < dim; ++r) eig[r] = std::pow(condition, unit(rng));
    Matrix a = q * eig.asDiagonal() * q.transpose();
    a = 0.5 * (a + a.transpose()).eval();
    Vector center(dim);
    for (int r = 0; r < dim; ++r) center[r] = -2.0 + 4.0 * unit(rng);
    spec.hessians.push_back(std::move(a));
    spec.centers.push_back(std::move(center));
    spec.offsets.push_back(0.0);
  }
  return std::make_shared<QuadSuite>(std::move(spec), "quad_random");
}

std::shared_ptr<QuadSuite> symmetric_quad_pair() {
  QuadSpec spec;
  spec.hessians = {Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  spec.centers = {Vector::Constant(1, 0.0), Vector::Constant(1, 2.0)};
  spec.offsets = {0.0, 0.0};
  return std::make_shared<QuadSuite>(std::move(spec), "quad_pair");
}

// ---------------------------------------------------------------------------
// scaled

ScaledSuite::ScaledSuite(SuitePtr base, Vector scales) : base_(std::move(base)), scales_(std::move(scales)) {
  if (!base_) throw InvalidInput("scaled suite needs a base suite");
  if (scales_.size() != base_->tasks()) throw InvalidInput("scaled suite: one scale per task required");
  if (!scales_.allFinite() || (scales_.array() <= 0.0).any()) {
    throw InvalidInput("scaled suite: scales must be positive");
  }
}

Vector ScaledSuite::losses(const Vector& x) const { return base_->losses(x).cwiseProduct(scales_); }

Evaluation ScaledSuite::evaluate(const Vector& x) const {
  Evaluation e = base_->evaluate(x);
  e.losses = e.losses.cwiseProduct(scales_);
  e.grads = scales_.asDiagonal() * e.grads;
  return e;
}

Vector ScaledSuite::lower_level_solution(const SimplexWeights& w) const {
  // sum_i w_i s_i l_i has the same minimizer as the base sum with weights
  // proportional to w_i s_i.
  Vector ws = w.values().cwiseProduct(scales_);
  ws /= ws.sum();
  return base_->lower_level_solution(SimplexWeights(std::move(ws)));
}

SuitePtr scaled_suite(SuitePtr base, Vector scales) {
  return std::make_shared<ScaledSuite>(std::move(base), std::move(scales));
}

}  // namespace ldc

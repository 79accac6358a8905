#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ldc/core_math.hpp"
#include "ldc/types.hpp"

namespace ldc {

/// Losses l(x) in R^K and the gradient matrix G(x) in R^{K x d}, row i = grad l_i.
struct Evaluation {
  Vector losses;
  Matrix grads;
};

/// A bundle of K differentiable losses over a shared parameter x in R^d.
/// Implementations are immutable after construction and safe to evaluate
/// from several threads.
class TaskSuite {
 public:
  virtual ~TaskSuite() = default;

  virtual std::string id() const = 0;
  virtual int tasks() const = 0;
  virtual int dim() const = 0;

  virtual Vector losses(const Vector& x) const = 0;
  virtual Evaluation evaluate(const Vector& x) const = 0;

  /// True when argmin_x sum_i w_i l_i(x) is available in closed form.
  virtual bool has_lower_level_solution() const { return false; }
  /// Closed-form minimizer of the w-weighted sum. Throws ConfigError when
  /// has_lower_level_solution() is false.
  virtual Vector lower_level_solution(const SimplexWeights& w) const;

 protected:
  void check_point(const Vector& x) const;
};

using SuitePtr = std::shared_ptr<const TaskSuite>;

/// The two-task toy landscape with tanh gates and log / quadratic branches.
/// The clamps max(., 5e-6) and max(., 0) are differentiated piecewise: the
/// branch is active when the argument is >= its threshold, otherwise the
/// derivative is zero.
class Toy2Suite final : public TaskSuite {
 public:
  static constexpr double kLogFloor = 0.000005;

  std::string id() const override { return "toy2"; }
  int tasks() const override { return 2; }
  int dim() const override { return 2; }
  Vector losses(const Vector& x) const override;
  Evaluation evaluate(const Vector& x) const override;

  /// The five starting points used for trajectory plots.
  static std::vector<Vector> reference_starts();
};

struct QuadSpec {
  std::vector<Matrix> hessians;  // A_i, symmetric positive definite, d x d
  std::vector<Vector> centers;   // a_i
  std::vector<double> offsets;   // c_i >= 0
};

/// l_i(x) = 1/2 (x - a_i)^T A_i (x - a_i) + c_i.
class QuadSuite final : public TaskSuite {
 public:
  /// Throws InvalidInput on shape mismatch, non-SPD A_i or negative offsets.
  explicit QuadSuite(QuadSpec spec, std::string id = "quad");

  std::string id() const override { return id_; }
  int tasks() const override { return static_cast<int>(spec_.hessians.size()); }
  int dim() const override { return dim_; }
  Vector losses(const Vector& x) const override;
  Evaluation evaluate(const Vector& x) const override;

  bool has_lower_level_solution() const override { return true; }
  Vector lower_level_solution(const SimplexWeights& w) const override;

  const QuadSpec& spec() const { return spec_; }

  /// Smallest / largest eigenvalue of sum_i w_i A_i.
  double min_curvature(const SimplexWeights& w) const;
  double max_curvature(const SimplexWeights& w) const;
  /// max_i lambda_max(A_i): bounds the x-smoothness of every weighted sum.
  double max_curvature() const { return max_eig_; }
  /// min_i lambda_min(A_i): bounds the PL constant of every weighted sum.
  double min_curvature() const { return min_eig_; }

  /// K = 2 only: the Pareto set is {x*(w, 1 - w) : w in [0, 1]}.
  Vector front_point(double w1) const;
  Vector front_losses(double w1) const;
  /// Distance in loss space from `point` to the analytic front (K = 2 only),
  /// via a dense scan of w1 followed by golden-section refinement.
  double distance_to_front(const Vector& loss_point) const;

 private:
  QuadSpec spec_;
  std::string id_;
  int dim_ = 0;
  double max_eig_ = 0.0;
  double min_eig_ = 0.0;
};

/// Random SPD quadratic suite: eigenvalues log-uniform in [1, condition],
/// centers uniform in [-2, 2]^d, zero offsets.
std::shared_ptr<QuadSuite> random_quad_suite(int tasks, int dim, std::uint64_t seed,
                                             double condition = 4.0);

/// Two one-dimensional unit quadratics centered at 0 and 2.
std::shared_ptr<QuadSuite> symmetric_quad_pair();

/// l_i <- s_i * l_i with gradient rows scaled identically.
class ScaledSuite final : public TaskSuite {
 public:
  ScaledSuite(SuitePtr base, Vector scales);

  std::string id() const override { return base_->id() + "+scaled"; }
  int tasks() const override { return base_->tasks(); }
  int dim() const override { return base_->dim(); }
  Vector losses(const Vector& x) const override;
  Evaluation evaluate(const Vector& x) const override;

  bool has_lower_level_solution() const override { return base_->has_lower_level_solution(); }
  Vector lower_level_solution(const SimplexWeights& w) const override;

  const TaskSuite& base() const { return *base_; }
  const Vector& scales() const { return scales_; }

 private:
  SuitePtr base_;
  Vector scales_;
};

SuitePtr scaled_suite(SuitePtr base, Vector scales);

}  // namespace ldc

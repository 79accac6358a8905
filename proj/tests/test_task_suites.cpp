#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ldc/bilevel.hpp"
#include "ldc/harness/gradcheck.hpp"
#include "ldc/normalization.hpp"
#include "ldc/task_suites.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace ldc;
using ldc::harness::relative_gradient_error;

namespace {

bool toy_away_from_kinks(const Vector& x) {
  const double th = std::tanh(x[1]);
  const double u1 = std::abs(0.5 * (-x[0] - 7.0) + th);
  const double u2 = std::abs(0.5 * (-x[0] + 3.0) + th + 2.0);
  return std::abs(std::tanh(0.5 * x[1])) > 1e-3 && std::abs(u1 - Toy2Suite::kLogFloor) > 1e-3 &&
         std::abs(u2 - Toy2Suite::kLogFloor) > 1e-3;
}

}  // namespace

TEST_CASE("toy losses at reference points") {
  const Toy2Suite toy;
  const Vector z = toy.losses(Eigen::Vector2d(0, 0));
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);

  const Vector l = toy.losses(Eigen::Vector2d(0, 10));
  const auto ref = oracle::toy_losses(0, 10);
  CHECK(std::abs(ref.l1 - 0.6915) <= 1e-3);
  CHECK(std::abs(ref.l2 - 7.504) <= 1e-3);
  CHECK(std::abs(l[0] - ref.l1) <= 1e-12);
  CHECK(std::abs(l[1] - ref.l2) <= 1e-12);
}

TEST_CASE("toy losses agree with the term-by-term oracle everywhere") {
  const Toy2Suite toy;
  testgen::Gen gen(31);
  for (int t = 0; t < 2000; ++t) {
    const double a = gen.uniform(-12, 12), b = gen.uniform(-12, 12);
    const Vector l = toy.losses(Eigen::Vector2d(a, b));
    const auto ref = oracle::toy_losses(a, b);
    CHECK(std::abs(l[0] - ref.l1) <= 1e-12 * (1 + std::abs(ref.l1)));
    CHECK(std::abs(l[1] - ref.l2) <= 1e-12 * (1 + std::abs(ref.l2)));
  }
  CHECK(Toy2Suite::reference_starts().size() == 5);
}

TEST_CASE("toy gradients match finite differences away from the clamps") {
  const Toy2Suite toy;
  testgen::Gen gen(32);
  int checked = 0;
  while (checked < 100) {
    const Vector x = gen.vector(2, -10, 10);
    if (!toy_away_from_kinks(x)) continue;
    ++checked;
    const Evaluation e = toy.evaluate(x);
    CHECK(e.losses.allFinite());
    CHECK(e.grads.rows() == 2);
    CHECK(e.grads.cols() == 2);
    for (int i = 0; i < 2; ++i) {
      const Vector fd = finite_diff_grad([&](const Vector& z) { return toy.losses(z)[i]; }, x, 1e-6);
      CHECK(relative_gradient_error(e.grads.row(i).transpose(), fd) <= 1e-5);
    }
  }
}

TEST_CASE("quad suite examples") {
  auto pair = symmetric_quad_pair();
  const Vector xs = pair->lower_level_solution(SimplexWeights::uniform(2));
  CHECK(xs[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(SimplexWeights::uniform(2).values().dot(pair->losses(xs)) == doctest::Approx(0.5));

  testgen::Gen gen(33);
  QuadSpec s = gen.quad_spec(2, 3);
  s.offsets = {0.25, 0.75};
  const QuadSuite q(s);
  const Vector x1 = q.lower_level_solution(SimplexWeights::vertex(2, 0));
  CHECK((x1 - s.centers[0]).norm() <= 1e-12);
  CHECK(std::abs(q.losses(x1)[0] - 0.25) <= 1e-12);
}

TEST_CASE("quad suite rejects malformed specs") {
  QuadSpec s;
  s.hessians = {(Matrix(1, 1) << -1.0).finished()};
  s.centers = {Vector::Zero(1)};
  s.offsets = {0.0};
  CHECK_THROWS_AS(QuadSuite{s}, InvalidInput);
  s.hessians = {(Matrix(2, 2) << 1, 2, 0, 1).finished()};
  s.centers = {Vector::Zero(2)};
  CHECK_THROWS_AS(QuadSuite{s}, InvalidInput);
  s.hessians = {Matrix::Identity(2, 2)};
  s.offsets = {-1.0};
  CHECK_THROWS_AS(QuadSuite{s}, InvalidInput);
  CHECK_THROWS_AS(Toy2Suite().losses(Vector::Zero(3)), InvalidInput);
  CHECK_THROWS_AS(Toy2Suite().lower_level_solution(SimplexWeights::uniform(2)), ConfigError);
}

TEST_CASE("quad gradients match finite differences") {
  for (int k : {2, 3, 11}) {
    auto q = random_quad_suite(k, 6, 100 + k);
    testgen::Gen gen(34 + k);
    for (int p = 0; p < 100; ++p) {
      const Vector x = gen.vector(6, -3, 3);
      const Evaluation e = q->evaluate(x);
      CHECK((e.losses - q->losses(x)).cwiseAbs().maxCoeff() == 0.0);
      for (int i = 0; i < k; ++i) {
        const Vector fd = finite_diff_grad([&](const Vector& z) { return q->losses(z)[i]; }, x, 1e-6);
        CHECK(relative_gradient_error(e.grads.row(i).transpose(), fd) <= 1e-5);
      }
    }
  }
}

TEST_CASE("quad lower-level solution is stationary for random weights") {
  for (int k : {2, 3, 11}) {
    auto q = random_quad_suite(k, 8, 200 + k);
    testgen::Gen gen(35 + k);
    for (int t = 0; t < 100; ++t) {
      const SimplexWeights w(gen.simplex(k));
      const Vector xs = q->lower_level_solution(w);
      const Vector grad = q->evaluate(xs).grads.transpose() * w.values();
      CHECK(grad.norm() <= 1e-9);
    }
  }
}

TEST_CASE("quad curvature bounds bracket the weighted sums") {
  auto q = random_quad_suite(3, 5, 7, 10.0);
  testgen::Gen gen(36);
  for (int t = 0; t < 50; ++t) {
    const SimplexWeights w(gen.simplex(3));
    CHECK(q->min_curvature(w) >= q->min_curvature() - 1e-12);
    CHECK(q->max_curvature(w) <= q->max_curvature() + 1e-12);
  }
  CHECK(q->min_curvature() >= 1.0 - 1e-9);
  CHECK(q->max_curvature() <= 10.0 + 1e-9);
}

TEST_CASE("quad front helpers") {
  auto pair = symmetric_quad_pair();
  CHECK(pair->front_point(1.0)[0] == doctest::Approx(0.0));
  const Vector fl = pair->front_losses(0.25);
  CHECK(pair->distance_to_front(fl) <= 1e-9);
  CHECK(pair->distance_to_front(Eigen::Vector2d(2.0, 2.0)) > 0.1);
  CHECK_THROWS_AS(random_quad_suite(3, 2, 1)->front_point(0.5), ConfigError);
}

TEST_CASE("scaled suite") {
  auto base = random_quad_suite(3, 4, 9);
  const SuitePtr same = scaled_suite(base, Vector::Ones(3));
  testgen::Gen gen(37);
  const Eigen::Vector3d s(0.5, 3.0, 10.0);
  const SuitePtr scaled = scaled_suite(base, s);
  for (int t = 0; t < 50; ++t) {
    const Vector x = gen.vector(4, -2, 2);
    const Evaluation b = base->evaluate(x);
    const Evaluation e1 = same->evaluate(x);
    CHECK(e1.losses == b.losses);
    CHECK(e1.grads == b.grads);
    const Evaluation e = scaled->evaluate(x);
    for (int i = 0; i < 3; ++i) {
      CHECK(e.losses[i] == s[i] * b.losses[i]);
      for (int j = 0; j < 4; ++j) CHECK(e.grads(i, j) == s[i] * b.grads(i, j));
    }
  }
  CHECK_THROWS_AS(scaled_suite(base, Eigen::Vector3d(1, 0, 1)), InvalidInput);
  CHECK_THROWS_AS(scaled_suite(base, Eigen::Vector2d(1, 1)), InvalidInput);
}

TEST_CASE("normalization examples") {
  const Eigen::Vector2d b(2.0, 4.0);
  Matrix g(2, 2);
  g << 1, 2, 3, 4;

  NormalizationState r = make_normalization(NormalizationMode::rescale, 2);
  r = capture_baseline(b, r, 0);
  CHECK(r.baseline == b);
  r = capture_baseline(Eigen::Vector2d(1, 1), r, 100);
  CHECK(r.baseline == b);
  const NormalizedLosses nr = normalize(b, g, r);
  CHECK(nr.losses == Eigen::Vector2d(1, 1));
  CHECK(nr.grads(1, 1) == 1.0);

  NormalizationState lg = make_normalization(NormalizationMode::log, 2, 10);
  lg = capture_baseline(b, lg, 0);
  CHECK(normalize_losses(b, lg).cwiseAbs().maxCoeff() == 0.0);
  const Vector e_b = std::exp(1.0) * b;
  const NormalizedLosses nl = normalize(e_b, g, lg);
  CHECK(std::abs(nl.losses[0] - 1.0) <= 1e-15);
  CHECK(std::abs(nl.losses[1] - 1.0) <= 1e-15);
  CHECK(std::abs(nl.grads(0, 1) - 2.0 / e_b[0]) <= 1e-15);
  lg = capture_baseline(Eigen::Vector2d(7, 8), lg, 5);
  CHECK(lg.baseline == b);
  lg = capture_baseline(Eigen::Vector2d(7, 8), lg, 10);
  CHECK(lg.baseline == Eigen::Vector2d(7, 8));

  NormalizationState fl = capture_baseline(Eigen::Vector2d(0, 5), make_normalization(NormalizationMode::rescale, 2), 0);
  CHECK(fl.baseline[0] == 1e-12);
  CHECK(fl.baseline[1] == 5.0);

  const NormalizationState none = make_normalization(NormalizationMode::none, 2);
  const NormalizedLosses nn = normalize(b, g, capture_baseline(b, none, 0));
  CHECK(nn.losses == b);
  CHECK(nn.grads == g);

  CHECK(parse_normalization("log") == NormalizationMode::log);
  CHECK_THROWS_AS(parse_normalization("zscore"), ConfigError);
}

TEST_CASE("normalization round trips through its inverse") {
  testgen::Gen gen(38);
  for (auto mode : {NormalizationMode::none, NormalizationMode::rescale, NormalizationMode::log}) {
    for (int t = 0; t < 300; ++t) {
      const int k = gen.integer(1, 8);
      NormalizationState st = make_normalization(mode, k);
      st = capture_baseline(gen.vector(k, 0.1, 10.0), st, 0);
      const Vector raw = gen.vector(k, 1e-3, 50.0);
      const Vector back = denormalize_losses(normalize_losses(raw, st), st);
      for (int i = 0; i < k; ++i) CHECK(std::abs(back[i] - raw[i]) <= 1e-12 * raw[i]);
    }
  }
}

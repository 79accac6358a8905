#include "ldc/harness/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ldc/bilevel.hpp"
#include "ldc/normalization.hpp"
#include "ldc/task_suites.hpp"

namespace ldc::harness {

double relative_gradient_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-6});
  return (a - b).norm() / scale;
}

namespace {

struct Case {
  std::string name;
  SuitePtr suite;
};

std::vector<Case> cases_for(const std::string& which) {
  std::vector<Case> all{{"toy2", std::make_shared<Toy2Suite>()},
                        {"quad_k2", random_quad_suite(2, 6, 11)},
                        {"quad_k3", random_quad_suite(3, 6, 12)},
                        {"quad_k11", random_quad_suite(11, 6, 13)}};
  if (which == "all") return all;
  for (auto& c : all) {
    if (c.name == which) return {c};
  }
  throw ConfigError("unknown gradcheck suite '" + which + "' (valid: all, toy2, quad_k2, quad_k3, quad_k11)");
}

// Rejects toy points whose max() arguments sit within 1e-3 of a threshold.
bool toy_point_ok(const Vector& x) {
  constexpr double margin = 1e-3;
  const double th = std::tanh(x[1]);
  const double u1 = std::abs(0.5 * (-x[0] - 7.0) + th);
  const double u2 = std::abs(0.5 * (-x[0] + 3.0) + th + 2.0);
  return std::abs(std::tanh(0.5 * x[1])) > margin && std::abs(u1 - Toy2Suite::kLogFloor) > margin &&
         std::abs(u2 - Toy2Suite::kLogFloor) > margin;
}

Vector random_point(const Case& c, std::mt19937_64& rng) {
  const bool toy = c.name == "toy2";
  std::uniform_real_distribution<double> u(toy ? -10.0 : -3.0, toy ? 10.0 : 3.0);
  Vector x(c.suite->dim());
  do {
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = u(rng);
  } while (toy && !toy_point_ok(x));
  return x;
}

}  // namespace

std::vector<GradCheckResult> gradient_check(const GradCheckOptions& opts) {
  if (opts.points < 1) throw ConfigError("gradcheck needs at least one point");
  std::vector<GradCheckResult> results;
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> logit(-2.0, 2.0);
  std::uniform_real_distribution<double> base(0.5, 2.0);
  const double h = opts.h;

  for (const Case& c : cases_for(opts.suite)) {
    const TaskSuite& suite = *c.suite;
    const int k = suite.tasks();
    std::map<std::string, double> worst;
    const char* names[] = {"task_grads", "grad_x_g", "grad_W_g", "grad_x_f_tau_ones",
                           "grad_W_f_tau_ones", "grad_x_f_tau_sigma", "grad_W_f_tau_sigma"};
    for (const char* n : names) worst[n] = 0.0;

    for (int p = 0; p < opts.points; ++p) {
      const Vector x = random_point(c, rng);
      Vector logits(k);
      for (int i = 0; i < k; ++i) logits[i] = logit(rng);
      const RouterState router(logits);
      NormalizationState norm = make_normalization(NormalizationMode::rescale, k);
      for (int i = 0; i < k; ++i) norm.baseline[i] = base(rng);
      norm.captured = true;

      const Evaluation e = suite.evaluate(x);
      for (int i = 0; i < k; ++i) {
        const Vector fd = finite_diff_grad([&](const Vector& z) { return suite.losses(z)[i]; }, x, h);
        worst["task_grads"] = std::max(worst["task_grads"], relative_gradient_error(e.grads.row(i).transpose(), fd));
      }

      const NormalizedLosses nl = normalize(e.losses, e.grads, norm);
      auto losses_at = [&](const Vector& z) { return normalize_losses(suite.losses(z), norm); };

      const LevelValue g = lower_value_and_grads(router, nl.losses, nl.grads);
      const Vector g_x = finite_diff_grad([&](const Vector& z) { return softmax(logits).values().dot(losses_at(z)); }, x, h);
      const Vector g_w = finite_diff_grad([&](const Vector& w) { return softmax(w).values().dot(nl.losses); }, logits, h);
      worst["grad_x_g"] = std::max(worst["grad_x_g"], relative_gradient_error(g.grad_x, g_x));
      worst["grad_W_g"] = std::max(worst["grad_W_g"], relative_gradient_error(g.grad_w, g_w));

      for (TauMode tau : {TauMode::ones, TauMode::sigma}) {
        UpperLevelConfig cfg;
        cfg.tau = tau;
        cfg.soft_abs.gamma = opts.gamma;
        const LevelValue f = upper_value_and_grads(router, nl.losses, nl.grads, cfg);
        const Vector f_x = finite_diff_grad(
            [&](const Vector& z) { return upper_terms(softmax(logits), losses_at(z), cfg).value; }, x, h);
        const Vector f_w =
            finite_diff_grad([&](const Vector& w) { return upper_terms(softmax(w), nl.losses, cfg).value; }, logits, h);
        const std::string suffix = tau == TauMode::ones ? "_tau_ones" : "_tau_sigma";
        worst["grad_x_f" + suffix] = std::max(worst["grad_x_f" + suffix], relative_gradient_error(f.grad_x, f_x));
        worst["grad_W_f" + suffix] = std::max(worst["grad_W_f" + suffix], relative_gradient_error(f.grad_w, f_w));
      }
    }
    for (const char* n : names) results.push_back({c.name, k, n, opts.points, worst[n]});
  }
  return results;
}

}  // namespace ldc::harness

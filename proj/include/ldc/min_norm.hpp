#pragma once

#include "ldc/core_math.hpp"
#include "ldc/types.hpp"

namespace ldc {

enum class MinNormMethod { frank_wolfe, projected_gradient };

struct MinNormOptions {
  MinNormMethod method = MinNormMethod::frank_wolfe;
  int max_iterations = 2000;
  double gap_tolerance = 1e-10;
  /// K = 2 uses the closed form unless this is cleared.
  bool two_task_closed_form = true;
};

struct MinNormResult {
  SimplexWeights weights;
  double residual = 0.0;  // ||G^T w||^2
  int iterations = 0;
  double gap = 0.0;       // final Frank-Wolfe duality gap (0 for closed forms)
};

/// Minimizes ||G^T w||^2 over the simplex for a K x d gradient matrix G.
///
/// K = 1 and K = 2 are solved in closed form. For K >= 3 the default is
/// Frank-Wolfe with away steps and exact line search on the Gram matrix,
/// stopped when the duality gap drops below `gap_tolerance`; away steps
/// keep convergence linear when the minimizer sits on a face of the simplex.
MinNormResult min_norm_weights(const Matrix& grads, const MinNormOptions& opts = {});

/// Same problem given the Gram matrix M = G G^T.
MinNormResult min_norm_from_gram(const Matrix& gram, const MinNormOptions& opts = {});

/// Exact minimizer of ||w1 g1 + (1 - w1) g2||^2 over w1 in [0, 1], from the
/// Gram entries. Returns w1.
double two_task_min_norm(double g11, double g12, double g22);

}  // namespace ldc

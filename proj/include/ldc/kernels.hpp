#pragma once

#include "ldc/core_math.hpp"
#include "ldc/types.hpp"

// Data-parallel inner loops. Every kernel has a `_serial` reference that the
// tests compare against; the OpenMP versions give each output element to a
// single thread and keep the serial accumulation order, so both produce
// bitwise-identical results for any thread count.
namespace ldc::kernels {

/// Problems smaller than this many multiply-adds stay on the calling thread.
inline constexpr long kParallelWork = 1L << 16;

/// G^T c for a K x d gradient matrix G and K coefficients c.
Vector combine_rows_serial(const Matrix& grads, const Vector& coeffs);
Vector combine_rows(const Matrix& grads, const Vector& coeffs);

/// G G^T (K x K).
Matrix gram_serial(const Matrix& grads);
Matrix gram(const Matrix& grads);

/// Central differences with the coordinates split across threads.
/// `fn` must be safe to call concurrently.
Vector finite_diff_grad_parallel(const ScalarFn& fn, const Vector& x, double h);

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();

}  // namespace ldc::kernels

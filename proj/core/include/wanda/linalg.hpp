// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "wanda/matrix.hpp"

namespace wanda {

enum class NormKind { l1, l2, linf };

DenseMatrix transpose(const DenseMatrix& a);

// c = a * b. Accumulation order over k is fixed (ascending), so results are
// identical for any thread count.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// c = a * b^T without materializing the transpose. This is the layout the
// forward pass wants: activations (tokens x c_in) times weights (c_out x c_in).
DenseMatrix matmul_bt(const DenseMatrix& a, const DenseMatrix& b);

// x^T * x, exploiting symmetry. Token-blocked so the output tile stays hot.
DenseMatrix gram(const DenseMatrix& x);

// diag(x^T x): per-column sum of squares.
std::vector<double> column_sumsq(const DenseMatrix& x);

// Per-column norm of x across rows (tokens).
std::vector<double> column_norms(const DenseMatrix& x, NormKind kind);

// Solves h * v = rhs for symmetric positive definite h via Cholesky.
// Symmetry is checked up front (1e-6 relative); a non-positive pivot throws
// SingularError carrying the pivot index.
std::vector<double> spd_solve(const DenseMatrix& h, const std::vector<double>& rhs);

// Full inverse of a symmetric positive definite matrix (same checks).
DenseMatrix spd_inverse(const DenseMatrix& h);

}  // namespace wanda

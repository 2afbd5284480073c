// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <utility>

#include "wanda/prune.hpp"

namespace wanda {

// Damped Gram matrix of one layer's inputs: h = x^T x + lambda * I.
// Positive definiteness is checked where it is needed — at factorization of
// the kept-kept submatrix — because the full matrix may legitimately be
// singular (e.g. fewer tokens than features at lambda = 0) while every
// kept-kept block used for updates is fine.
struct Hessian {
    DenseMatrix h;
    double lambda = 0.0;
};

struct UpdatePolicy {
    enum class Kind { none, sequential, iterative };
    Kind kind = Kind::none;
    std::size_t blocksize = 128;  // iterative only

    static UpdatePolicy none() { return {Kind::none, 128}; }
    static UpdatePolicy sequential() { return {Kind::sequential, 128}; }
    static UpdatePolicy iterative(std::size_t blocksize) { return {Kind::iterative, blocksize}; }
};

// lambda = nullopt means "auto": 0.01 * mean(diag(x^T x)).
double resolve_lambda(const DenseMatrix& x, std::optional<double> lambda);

Hessian build_hessian(const DenseMatrix& x, double lambda);

// Least-squares refit of one row on its kept support: pruned entries go to
// zero and the kept entries w'_K solve H_KK w'_K = H_{K,:} w_row, i.e. they
// minimize || x w' - x w ||_2 over vectors supported on K. An all-kept row
// is returned unchanged, bit-for-bit.
std::vector<double> obs_update_row(const std::vector<double>& w_row,
                                   const std::vector<std::uint8_t>& kept, const Hessian& h);

// obs_update_row applied to every row of w under mask, sharing one Hessian.
DenseMatrix sequential_update(const DenseMatrix& w, const PruneMask& mask, const Hessian& h);

// Blockwise prune-then-compensate over input channels, left to right. Each
// aligned block of `blocksize` columns is scored on the *current* weights
// (Wanda norms and the Hessian stay frozen from the original inputs), each
// row prunes its floor(blocksize * s) lowest-scoring weights in the block,
// and the kept columns from this block onward are refit by least squares to
// reconstruct the original row outputs. The emergent comparison group is
// (input, blocksize). Ratio targets only.
std::pair<DenseMatrix, PruneMask> iterative_prune_update(const DenseMatrix& w,
                                                         const DenseMatrix& x, MetricKind metric,
                                                         NormKind norm, double sparsity,
                                                         std::size_t blocksize, double lambda);

}  // namespace wanda

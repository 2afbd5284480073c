// SPDX-License-Identifier: Apache-2.0
#include "wanda/update.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wanda/errors.hpp"
#include "wanda/parallel.hpp"

namespace wanda {

namespace {

// Solves the least-squares system restricted to `free_cols`:
//   H_ff v = (H w_target)_f - sum over fixed columns p of H_fp w_fixed[p]
// where "fixed" is every column not in free_cols, taken at w_fixed values.
// Returns v in free_cols order.
std::vector<double> solve_on_support(const Hessian& h, const std::vector<std::size_t>& free_cols,
                                     const std::vector<double>& w_target,
                                     const std::vector<double>& w_fixed) {
    const std::size_t f = free_cols.size();
    DenseMatrix a(f, f);
    std::vector<double> rhs(f);
    const std::size_t n = h.h.rows;
    for (std::size_t r = 0; r < f; ++r) {
        const double* hrow = h.h.row(free_cols[r]);
        for (std::size_t c = 0; c < f; ++c) a.at(r, c) = hrow[free_cols[c]];
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += hrow[j] * w_target[j];
        // Subtract the fixed columns' contribution. Free columns contribute
        // nothing here: their w_fixed entries are the unknowns being solved.
        double fixed = 0.0;
        for (std::size_t j = 0; j < n; ++j) fixed += hrow[j] * w_fixed[j];
        rhs[r] = s - fixed;
    }
    return spd_solve(a, rhs);
}

}  // namespace

double resolve_lambda(const DenseMatrix& x, std::optional<double> lambda) {
    if (lambda.has_value()) {
        if (!(*lambda >= 0.0)) throw ArgError("lambda must be >= 0");
        return *lambda;
    }
    const std::vector<double> d = column_sumsq(x);
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(d.size());
    return 0.01 * mean;
}

Hessian build_hessian(const DenseMatrix& x, double lambda) {
    if (!(lambda >= 0.0)) throw ArgError("build_hessian: lambda must be >= 0");
    Hessian h{gram(x), lambda};
    for (std::size_t j = 0; j < h.h.rows; ++j) h.h.at(j, j) += lambda;
    return h;
}

std::vector<double> obs_update_row(const std::vector<double>& w_row,
                                   const std::vector<std::uint8_t>& kept, const Hessian& h) {
    const std::size_t n = w_row.size();
    if (h.h.rows != h.h.cols || h.h.rows != n)
        throw ShapeError("obs_update_row: Hessian is " + std::to_string(h.h.rows) + "x" +
                         std::to_string(h.h.cols) + " but the row has " + std::to_string(n) +
                         " entries");
    if (kept.size() != n)
        throw ShapeError("obs_update_row: mask length " + std::to_string(kept.size()) +
                         " does not match row length " + std::to_string(n));

    std::vector<std::size_t> support;
    support.reserve(n);
    for (std::size_t j = 0; j < n; ++j)
        if (kept[j]) support.push_back(j);
    if (support.size() == n) return w_row;  // nothing pruned: exact no-op

    std::vector<double> out(n, 0.0);
    if (support.empty()) return out;

    // The whole row is the target and nothing outside the support is fixed
    // at a nonzero value, so the fixed-contribution vector is all zeros.
    const std::vector<double> zeros(n, 0.0);
    const std::vector<double> v = solve_on_support(h, support, w_row, zeros);
    for (std::size_t r = 0; r < support.size(); ++r) out[support[r]] = v[r];
    return out;
}

DenseMatrix sequential_update(const DenseMatrix& w, const PruneMask& mask, const Hessian& h) {
    if (mask.rows != w.rows || mask.cols != w.cols)
        throw ShapeError("sequential_update: mask is " + std::to_string(mask.rows) + "x" +
                         std::to_string(mask.cols) + " but weights are " + std::to_string(w.rows) +
                         "x" + std::to_string(w.cols));
    if (h.h.rows != w.cols)
        throw ShapeError("sequential_update: Hessian size " + std::to_string(h.h.rows) +
                         " does not match input width " + std::to_string(w.cols));
    DenseMatrix out(w.rows, w.cols);
    parallel_for(w.rows, [&](std::size_t i0, std::size_t i1) {
        std::vector<double> row(w.cols);
        std::vector<std::uint8_t> kept(w.cols);
        for (std::size_t i = i0; i < i1; ++i) {
            std::copy(w.row(i), w.row(i) + w.cols, row.begin());
            for (std::size_t j = 0; j < w.cols; ++j) kept[j] = mask.at(i, j);
            const std::vector<double> updated = obs_update_row(row, kept, h);
            std::copy(updated.begin(), updated.end(), out.row(i));
        }
    });
    return out;
}

std::pair<DenseMatrix, PruneMask> iterative_prune_update(const DenseMatrix& w,
                                                         const DenseMatrix& x, MetricKind metric,
                                                         NormKind norm, double sparsity,
                                                         std::size_t blocksize, double lambda) {
    if (w.rows == 0 || w.cols == 0)
        throw ShapeError("iterative_prune_update: weights must be nonempty");
    if (x.cols != w.cols)
        throw ShapeError("iterative_prune_update: calibration has " + std::to_string(x.cols) +
                         " features but weights have " + std::to_string(w.cols));
    if (!(sparsity >= 0.0 && sparsity < 1.0))
        throw ArgError("iterative_prune_update: sparsity must be in [0, 1)");
    if (blocksize == 0) throw ArgError("iterative_prune_update: blocksize must be >= 1");
    if (!(lambda >= 0.0)) throw ArgError("iterative_prune_update: lambda must be >= 0");

    const std::size_t cols = w.cols;
    // Frozen scoring inputs: activation norms and the (inverse) Hessian come
    // from the original calibration inputs once, not from updated weights.
    const Hessian h = build_hessian(x, lambda);
    std::vector<double> wanda_norms;
    if (metric == MetricKind::wanda) wanda_norms = column_norms(x, norm);
    std::vector<double> inv_diag;
    if (metric == MetricKind::sparsegpt) {
        const DenseMatrix inv = spd_inverse(h.h);
        inv_diag.resize(cols);
        for (std::size_t j = 0; j < cols; ++j) inv_diag[j] = inv.at(j, j);
    }

    DenseMatrix cur = w;
    PruneMask mask(w.rows, cols);
    bool anything_pruned = false;

    for (std::size_t c0 = 0; c0 < cols; c0 += blocksize) {
        const std::size_t c1 = std::min(c0 + blocksize, cols);
        const std::size_t quota = static_cast<std::size_t>(
            std::floor(static_cast<double>(c1 - c0) * sparsity));
        if (quota > 0) anything_pruned = true;
        const bool do_solve = anything_pruned;
        parallel_for(w.rows, [&](std::size_t i0, std::size_t i1) {
            std::vector<std::size_t> idx;
            std::vector<double> score(c1 - c0);
            std::vector<std::size_t> free_cols;
            std::vector<double> row_fixed(cols);
            for (std::size_t i = i0; i < i1; ++i) {
                double* wi = cur.row(i);
                if (quota > 0) {
                    for (std::size_t j = c0; j < c1; ++j) {
                        const double wv = wi[j];
                        switch (metric) {
                            case MetricKind::magnitude: score[j - c0] = std::fabs(wv); break;
                            case MetricKind::wanda: score[j - c0] = std::fabs(wv) * wanda_norms[j]; break;
                            case MetricKind::sparsegpt: score[j - c0] = wv * wv / inv_diag[j]; break;
                        }
                    }
                    idx.resize(c1 - c0);
                    for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = t;
                    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                        return score[a] < score[b];
                    });
                    for (std::size_t t = 0; t < quota; ++t) {
                        const std::size_t j = c0 + idx[t];
                        mask.kept[i * cols + j] = 0;
                        wi[j] = 0.0;
                    }
                }
                if (!do_solve) continue;
                // Refit every not-yet-frozen kept column (this block's
                // survivors and everything to the right) against the
                // original row outputs; columns left of the block stay at
                // their settled values.
                free_cols.clear();
                for (std::size_t j = c0; j < cols; ++j)
                    if (mask.kept[i * cols + j]) free_cols.push_back(j);
                if (free_cols.empty()) continue;
                std::fill(row_fixed.begin(), row_fixed.end(), 0.0);
                for (std::size_t j = 0; j < c0; ++j) row_fixed[j] = wi[j];
                std::vector<double> worig(w.row(i), w.row(i) + cols);
                const std::vector<double> v = solve_on_support(h, free_cols, worig, row_fixed);
                for (std::size_t r = 0; r < free_cols.size(); ++r) wi[free_cols[r]] = v[r];
            }
        });
    }
    return {std::move(cur), std::move(mask)};
}

}  // namespace wanda

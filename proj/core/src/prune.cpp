// SPDX-License-Identifier: Apache-2.0
#include "wanda/prune.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wanda/errors.hpp"
#include "wanda/parallel.hpp"

namespace wanda {

namespace {

std::size_t prune_quota(std::size_t group_size, double sparsity) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(group_size) * sparsity));
}

void check_scores(const DenseMatrix& v, const char* who) {
    for (double s : v.data)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw NonFiniteError(std::string(who) + ": produced a score that is not finite and >= 0");
}

}  // namespace

const char* metric_name(MetricKind k) {
    switch (k) {
        case MetricKind::magnitude: return "magnitude";
        case MetricKind::wanda: return "wanda";
        case MetricKind::sparsegpt: return "sparsegpt";
    }
    return "?";
}

const char* norm_name(NormKind k) {
    switch (k) {
        case NormKind::l1: return "l1";
        case NormKind::l2: return "l2";
        case NormKind::linf: return "linf";
    }
    return "?";
}

SparsityTarget SparsityTarget::from_ratio(double s) {
    if (!(s >= 0.0 && s < 1.0))
        throw ArgError("sparsity ratio must be in [0, 1), got " + std::to_string(s));
    SparsityTarget t;
    t.kind = Kind::ratio;
    t.ratio = s;
    return t;
}

SparsityTarget SparsityTarget::from_nm(std::size_t n, std::size_t m) {
    if (n == 0 || m == 0 || n > m)
        throw ArgError("structured target needs 1 <= n <= m, got " + std::to_string(n) + ":" +
                       std::to_string(m));
    SparsityTarget t;
    t.kind = Kind::structured_nm;
    t.n = n;
    t.m = m;
    return t;
}

std::size_t PruneMask::pruned_count() const {
    std::size_t n = 0;
    for (std::uint8_t k : kept) n += (k == 0);
    return n;
}

ScoreMatrix score_magnitude(const DenseMatrix& w) {
    if (w.rows == 0 || w.cols == 0) throw ShapeError("score_magnitude: weights must be nonempty");
    ScoreMatrix s{DenseMatrix(w.rows, w.cols)};
    for (std::size_t i = 0; i < w.data.size(); ++i) s.values.data[i] = std::fabs(w.data[i]);
    check_scores(s.values, "score_magnitude");
    return s;
}

ScoreMatrix score_wanda(const DenseMatrix& w, const std::vector<double>& input_norms) {
    if (w.rows == 0 || w.cols == 0) throw ShapeError("score_wanda: weights must be nonempty");
    if (input_norms.size() != w.cols)
        throw ShapeError("score_wanda: got " + std::to_string(input_norms.size()) +
                         " input norms for " + std::to_string(w.cols) + " input features");
    for (double n : input_norms)
        if (!(n >= 0.0) || !std::isfinite(n))
            throw ArgError("score_wanda: input norms must be finite and >= 0");
    ScoreMatrix s{DenseMatrix(w.rows, w.cols)};
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* wi = w.row(i);
        double* si = s.values.row(i);
        for (std::size_t j = 0; j < w.cols; ++j) si[j] = std::fabs(wi[j]) * input_norms[j];
    }
    check_scores(s.values, "score_wanda");
    return s;
}

ScoreMatrix score_sparsegpt(const DenseMatrix& w, const DenseMatrix& x, double lambda) {
    if (w.rows == 0 || w.cols == 0) throw ShapeError("score_sparsegpt: weights must be nonempty");
    if (x.cols != w.cols)
        throw ShapeError("score_sparsegpt: calibration has " + std::to_string(x.cols) +
                         " features but weights have " + std::to_string(w.cols));
    if (!(lambda >= 0.0)) throw ArgError("score_sparsegpt: lambda must be >= 0");
    DenseMatrix h = gram(x);
    for (std::size_t j = 0; j < h.rows; ++j) h.at(j, j) += lambda;
    const DenseMatrix inv = spd_inverse(h);
    ScoreMatrix s{DenseMatrix(w.rows, w.cols)};
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* wi = w.row(i);
        double* si = s.values.row(i);
        for (std::size_t j = 0; j < w.cols; ++j) si[j] = wi[j] * wi[j] / inv.at(j, j);
    }
    check_scores(s.values, "score_sparsegpt");
    return s;
}

double verify_reduction(const DenseMatrix& w, const DenseMatrix& x) {
    if (x.cols != w.cols)
        throw ShapeError("verify_reduction: calibration has " + std::to_string(x.cols) +
                         " features but weights have " + std::to_string(w.cols));
    const std::vector<double> sumsq = column_sumsq(x);
    const ScoreMatrix wanda = score_wanda(w, column_norms(x, NormKind::l2));
    double worst = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* wi = w.row(i);
        const double* si = wanda.values.row(i);
        for (std::size_t j = 0; j < w.cols; ++j) {
            const double a = wi[j] * wi[j] * sumsq[j];
            const double b = si[j] * si[j];
            const double rel = std::fabs(a - b) / std::max(std::fabs(b), 1e-12);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

PruneMask select_mask(const ScoreMatrix& s, const GroupingScheme& g, double sparsity) {
    const DenseMatrix& sc = s.values;
    if (sc.rows == 0 || sc.cols == 0) throw ShapeError("select_mask: scores must be nonempty");
    if (!(sparsity >= 0.0 && sparsity < 1.0))
        throw ArgError("select_mask: sparsity must be in [0, 1), got " + std::to_string(sparsity));

    // Each group lists its flat indices in ascending order, so a stable sort
    // by score breaks ties toward the lower flat index.
    std::vector<std::vector<std::size_t>> groups;
    const std::size_t rows = sc.rows, cols = sc.cols;
    switch (g.kind) {
        case GroupingScheme::Kind::per_layer: {
            std::vector<std::size_t> all(rows * cols);
            for (std::size_t f = 0; f < all.size(); ++f) all[f] = f;
            groups.push_back(std::move(all));
            break;
        }
        case GroupingScheme::Kind::per_output: {
            for (std::size_t i = 0; i < rows; ++i) {
                std::vector<std::size_t> grp(cols);
                for (std::size_t j = 0; j < cols; ++j) grp[j] = i * cols + j;
                groups.push_back(std::move(grp));
            }
            break;
        }
        case GroupingScheme::Kind::per_input: {
            for (std::size_t j = 0; j < cols; ++j) {
                std::vector<std::size_t> grp(rows);
                for (std::size_t i = 0; i < rows; ++i) grp[i] = i * cols + j;
                groups.push_back(std::move(grp));
            }
            break;
        }
        case GroupingScheme::Kind::blocked: {
            const std::size_t dim = g.axis == GroupingScheme::Axis::input ? cols : rows;
            if (g.blocksize == 0 || g.blocksize > dim)
                throw ArgError("select_mask: blocksize must be in [1, " + std::to_string(dim) +
                               "], got " + std::to_string(g.blocksize));
            if (g.axis == GroupingScheme::Axis::input) {
                for (std::size_t c0 = 0; c0 < cols; c0 += g.blocksize) {
                    const std::size_t c1 = std::min(c0 + g.blocksize, cols);
                    std::vector<std::size_t> grp;
                    grp.reserve(rows * (c1 - c0));
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = c0; j < c1; ++j) grp.push_back(i * cols + j);
                    groups.push_back(std::move(grp));
                }
            } else {
                for (std::size_t r0 = 0; r0 < rows; r0 += g.blocksize) {
                    const std::size_t r1 = std::min(r0 + g.blocksize, rows);
                    std::vector<std::size_t> grp((r1 - r0) * cols);
                    for (std::size_t f = 0; f < grp.size(); ++f) grp[f] = r0 * cols + f;
                    groups.push_back(std::move(grp));
                }
            }
            break;
        }
    }

    PruneMask mask(rows, cols);
    parallel_for(groups.size(), [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            std::vector<std::size_t>& idx = groups[b];
            const std::size_t quota = prune_quota(idx.size(), sparsity);
            if (quota == 0) continue;
            std::stable_sort(idx.begin(), idx.end(),
                             [&](std::size_t a, std::size_t c) { return sc.data[a] < sc.data[c]; });
            for (std::size_t t = 0; t < quota; ++t) mask.kept[idx[t]] = 0;
        }
    });
    return mask;
}

PruneMask select_nm_mask(const ScoreMatrix& s, std::size_t n, std::size_t m) {
    const DenseMatrix& sc = s.values;
    if (sc.rows == 0 || sc.cols == 0) throw ShapeError("select_nm_mask: scores must be nonempty");
    if (m == 0 || n > m)
        throw ArgError("select_nm_mask: need n <= m and m >= 1, got " + std::to_string(n) + ":" +
                       std::to_string(m));
    if (sc.cols % m != 0)
        throw ArgError("select_nm_mask: m=" + std::to_string(m) + " does not divide the input width " +
                       std::to_string(sc.cols));

    PruneMask mask(sc.rows, sc.cols);
    parallel_for(sc.rows, [&](std::size_t i0, std::size_t i1) {
        std::vector<std::size_t> idx(m);
        for (std::size_t i = i0; i < i1; ++i) {
            const double* si = sc.row(i);
            for (std::size_t b0 = 0; b0 < sc.cols; b0 += m) {
                for (std::size_t t = 0; t < m; ++t) idx[t] = b0 + t;
                std::stable_sort(idx.begin(), idx.end(),
                                 [&](std::size_t a, std::size_t c) { return si[a] < si[c]; });
                for (std::size_t t = 0; t < m - n; ++t) mask.kept[i * sc.cols + idx[t]] = 0;
            }
        }
    });
    return mask;
}

DenseMatrix apply_mask(const DenseMatrix& w, const PruneMask& mask) {
    if (mask.rows != w.rows || mask.cols != w.cols)
        throw ShapeError("apply_mask: mask is " + std::to_string(mask.rows) + "x" +
                         std::to_string(mask.cols) + " but weights are " + std::to_string(w.rows) +
                         "x" + std::to_string(w.cols));
    DenseMatrix out = w;
    for (std::size_t f = 0; f < out.data.size(); ++f)
        if (mask.kept[f] == 0) out.data[f] = 0.0;
    return out;
}

}  // namespace wanda

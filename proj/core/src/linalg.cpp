// SPDX-License-Identifier: Apache-2.0
#include "wanda/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wanda/errors.hpp"
#include "wanda/parallel.hpp"

namespace wanda {

namespace {

void check_nonempty(const DenseMatrix& a, const char* who) {
    if (a.rows == 0 || a.cols == 0)
        throw ShapeError(std::string(who) + ": matrix must be nonempty");
}

void check_symmetric(const DenseMatrix& h, const char* who) {
    if (h.rows != h.cols)
        throw ShapeError(std::string(who) + ": matrix must be square, got " +
                         std::to_string(h.rows) + "x" + std::to_string(h.cols));
    double amax = 0.0, dmax = 0.0;
    for (std::size_t i = 0; i < h.rows; ++i) {
        amax = std::max(amax, std::fabs(h.at(i, i)));
        for (std::size_t j = i + 1; j < h.cols; ++j) {
            amax = std::max({amax, std::fabs(h.at(i, j)), std::fabs(h.at(j, i))});
            dmax = std::max(dmax, std::fabs(h.at(i, j) - h.at(j, i)));
        }
    }
    if (dmax > 1e-6 * std::max(amax, std::numeric_limits<double>::min()))
        throw ArgError(std::string(who) + ": matrix is not symmetric (max asymmetry " +
                       std::to_string(dmax) + ")");
}

// Lower-triangular Cholesky factor. The pivot floor is relative
// (n * eps * max diagonal): a rank-deficient Gram matrix lands at roundoff
// scale with either sign, and must be reported as singular, not inverted
// into garbage.
DenseMatrix cholesky_lower(const DenseMatrix& h) {
    const std::size_t n = h.rows;
    DenseMatrix l(n, n);
    double max_diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) max_diag = std::max(max_diag, std::fabs(h.at(j, j)));
    const double pivot_floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;
    for (std::size_t j = 0; j < n; ++j) {
        const double* lj = l.row(j);
        double d = h.at(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= lj[k] * lj[k];
        if (!(d > pivot_floor))
            throw SingularError("matrix is not positive definite at pivot " + std::to_string(j) +
                                "; if this is a calibration Hessian, use lambda > 0",
                                j);
        const double diag = std::sqrt(d);
        l.at(j, j) = diag;
        parallel_for(n - j - 1, [&](std::size_t r0, std::size_t r1) {
            for (std::size_t r = r0; r < r1; ++r) {
                const std::size_t i = j + 1 + r;
                const double* li = l.row(i);
                double s = h.at(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
                l.at(i, j) = s / diag;
            }
        });
    }
    return l;
}

}  // namespace

DenseMatrix transpose(const DenseMatrix& a) {
    check_nonempty(a, "transpose");
    DenseMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    check_nonempty(a, "matmul");
    check_nonempty(b, "matmul");
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dimensions differ, " + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows));
    DenseMatrix c(a.rows, b.cols);
    parallel_for(a.rows, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const double* ai = a.row(i);
            double* ci = c.row(i);
            for (std::size_t k = 0; k < a.cols; ++k) {
                const double aik = ai[k];
                const double* bk = b.row(k);
                for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
            }
        }
    });
    return c;
}

DenseMatrix matmul_bt(const DenseMatrix& a, const DenseMatrix& b) {
    check_nonempty(a, "matmul_bt");
    check_nonempty(b, "matmul_bt");
    if (a.cols != b.cols)
        throw ShapeError("matmul_bt: column counts differ, " + std::to_string(a.cols) +
                         " vs " + std::to_string(b.cols));
    DenseMatrix c(a.rows, b.rows);
    parallel_for(a.rows, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const double* ai = a.row(i);
            double* ci = c.row(i);
            for (std::size_t j = 0; j < b.rows; ++j) {
                const double* bj = b.row(j);
                double s = 0.0;
                for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
                ci[j] = s;
            }
        }
    });
    return c;
}

DenseMatrix gram(const DenseMatrix& x) {
    check_nonempty(x, "gram");
    const std::size_t n = x.cols;
    DenseMatrix h(n, n);
    // Token-blocked upper-triangular accumulation. Each h(i,j) is owned by
    // one thread per block and tokens are consumed in ascending order, so the
    // sum order is fixed regardless of thread count.
    const std::size_t tile = 128;
    for (std::size_t t0 = 0; t0 < x.rows; t0 += tile) {
        const std::size_t t1 = std::min(t0 + tile, x.rows);
        parallel_for(n, [&](std::size_t i0, std::size_t i1) {
            for (std::size_t i = i0; i < i1; ++i) {
                double* hi = h.row(i);
                for (std::size_t t = t0; t < t1; ++t) {
                    const double* xt = x.row(t);
                    const double xi = xt[i];
                    for (std::size_t j = i; j < n; ++j) hi[j] += xi * xt[j];
                }
            }
        });
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) h.at(j, i) = h.at(i, j);
    return h;
}

std::vector<double> column_sumsq(const DenseMatrix& x) {
    check_nonempty(x, "column_sumsq");
    std::vector<double> acc(x.cols, 0.0);
    for (std::size_t t = 0; t < x.rows; ++t) {
        const double* xt = x.row(t);
        for (std::size_t j = 0; j < x.cols; ++j) acc[j] += xt[j] * xt[j];
    }
    return acc;
}

std::vector<double> column_norms(const DenseMatrix& x, NormKind kind) {
    check_nonempty(x, "column_norms");
    if (kind == NormKind::l2) {
        std::vector<double> acc = column_sumsq(x);
        for (double& v : acc) v = std::sqrt(v);
        return acc;
    }
    std::vector<double> acc(x.cols, 0.0);
    for (std::size_t t = 0; t < x.rows; ++t) {
        const double* xt = x.row(t);
        if (kind == NormKind::l1) {
            for (std::size_t j = 0; j < x.cols; ++j) acc[j] += std::fabs(xt[j]);
        } else {
            for (std::size_t j = 0; j < x.cols; ++j) acc[j] = std::max(acc[j], std::fabs(xt[j]));
        }
    }
    return acc;
}

std::vector<double> spd_solve(const DenseMatrix& h, const std::vector<double>& rhs) {
    check_nonempty(h, "spd_solve");
    check_symmetric(h, "spd_solve");
    const std::size_t n = h.rows;
    if (rhs.size() != n)
        throw ShapeError("spd_solve: rhs length " + std::to_string(rhs.size()) +
                         " does not match matrix size " + std::to_string(n));
    const DenseMatrix l = cholesky_lower(h);
    std::vector<double> y(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* li = l.row(i);
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= li[k] * y[k];
        y[i] = s / li[i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l.at(k, ii) * v[k];
        v[ii] = s / l.at(ii, ii);
    }
    return v;
}

DenseMatrix spd_inverse(const DenseMatrix& h) {
    check_nonempty(h, "spd_inverse");
    check_symmetric(h, "spd_inverse");
    const std::size_t n = h.rows;
    const DenseMatrix l = cholesky_lower(h);
    const DenseMatrix u = transpose(l);  // contiguous rows for back-substitution
    DenseMatrix inv(n, n);
    // Solve L L^T Z = I in column blocks; the inner loops run across the
    // block so they vectorize, and each block is owned by one thread.
    const std::size_t bw = 64;
    const std::size_t nblocks = (n + bw - 1) / bw;
    parallel_for(nblocks, [&](std::size_t b0, std::size_t b1) {
        std::vector<double> y, z;
        for (std::size_t b = b0; b < b1; ++b) {
            const std::size_t c0 = b * bw;
            const std::size_t w = std::min(bw, n - c0);
            y.assign(n * w, 0.0);
            z.assign(n * w, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double* li = l.row(i);
                double* yi = y.data() + i * w;
                if (i >= c0 && i < c0 + w) yi[i - c0] = 1.0;
                for (std::size_t k = 0; k < i; ++k) {
                    const double lik = li[k];
                    const double* yk = y.data() + k * w;
                    for (std::size_t c = 0; c < w; ++c) yi[c] -= lik * yk[c];
                }
                const double d = 1.0 / li[i];
                for (std::size_t c = 0; c < w; ++c) yi[c] *= d;
            }
            for (std::size_t ii = n; ii-- > 0;) {
                const double* ui = u.row(ii);
                double* zi = z.data() + ii * w;
                const double* yi = y.data() + ii * w;
                for (std::size_t c = 0; c < w; ++c) zi[c] = yi[c];
                for (std::size_t k = ii + 1; k < n; ++k) {
                    const double uik = ui[k];
                    const double* zk = z.data() + k * w;
                    for (std::size_t c = 0; c < w; ++c) zi[c] -= uik * zk[c];
                }
                const double d = 1.0 / ui[ii];
                for (std::size_t c = 0; c < w; ++c) zi[c] *= d;
            }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < w; ++c) inv.at(i, c0 + c) = z[i * w + c];
        }
    });
    return inv;
}

}  // namespace wanda

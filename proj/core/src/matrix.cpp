// SPDX-License-Identifier: Apache-2.0
#include "wanda/matrix.hpp"

#include <cmath>
#include <string>

#include "wanda/errors.hpp"

namespace wanda {

DenseMatrix::DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c) {
    if (r == 0 || c == 0)
        throw ShapeError("DenseMatrix: dimensions must be >= 1, got " + std::to_string(r) +
                         "x" + std::to_string(c));
    data.assign(r * c, 0.0);
}

bool DenseMatrix::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

bool same_shape(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows == b.rows && a.cols == b.cols;
}

}  // namespace wanda

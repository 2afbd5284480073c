// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace wanda {

// Dense row-major matrix. Values live in binary64; the file formats store
// binary32 (see store.hpp), so loaded values are exactly representable and
// round-trip bit-exactly.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c);  // zero-filled; throws ShapeError on a zero dim

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool all_finite() const;

    static DenseMatrix identity(std::size_t n);
};

bool same_shape(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace wanda

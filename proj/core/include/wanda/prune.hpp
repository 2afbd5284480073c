// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "wanda/linalg.hpp"

namespace wanda {

enum class MetricKind { magnitude, wanda, sparsegpt };

const char* metric_name(MetricKind k);
const char* norm_name(NormKind k);

// Nonnegative importance scores, same shape as the weight matrix they rate.
struct ScoreMatrix {
    DenseMatrix values;
};

// How weights are ranked against each other. per_output compares within one
// row, per_input within one column, per_layer across the whole matrix, and
// blocked within bands of `blocksize` consecutive inputs (columns) or
// outputs (rows) spanning the full other dimension. per_input is
// blocked(input, 1); per_layer is the single full-size group.
struct GroupingScheme {
    enum class Kind { per_layer, per_output, per_input, blocked };
    enum class Axis { input, output };
    Kind kind = Kind::per_output;
    Axis axis = Axis::input;    // blocked only
    std::size_t blocksize = 0;  // blocked only

    static GroupingScheme per_layer() { return {Kind::per_layer, Axis::input, 0}; }
    static GroupingScheme per_output() { return {Kind::per_output, Axis::input, 0}; }
    static GroupingScheme per_input() { return {Kind::per_input, Axis::input, 0}; }
    static GroupingScheme blocked(Axis axis, std::size_t blocksize) {
        return {Kind::blocked, axis, blocksize};
    }
};

// Either a plain ratio in [0, 1) or keep-n-of-every-m-consecutive-inputs.
struct SparsityTarget {
    enum class Kind { ratio, structured_nm };
    Kind kind = Kind::ratio;
    double ratio = 0.0;
    std::size_t n = 0, m = 0;

    static SparsityTarget from_ratio(double s);
    static SparsityTarget from_nm(std::size_t n, std::size_t m);
};

// kept[i*cols + j] == 1 keeps weight (i, j); 0 prunes it.
struct PruneMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> kept;

    PruneMask() = default;
    PruneMask(std::size_t r, std::size_t c) : rows(r), cols(c), kept(r * c, 1) {}
    std::uint8_t at(std::size_t i, std::size_t j) const { return kept[i * cols + j]; }
    std::size_t pruned_count() const;
};

// |w| elementwise.
ScoreMatrix score_magnitude(const DenseMatrix& w);

// |w(i,j)| * input_norms[j]: weight magnitude times the activation norm of
// the input feature it multiplies. input_norms comes from column_norms of
// the layer's live inputs.
ScoreMatrix score_wanda(const DenseMatrix& w, const std::vector<double>& input_norms);

// w(i,j)^2 / inv_diag(j) with inv_diag = diag((x^T x + lambda I)^-1).
// Rank-deficient x with lambda=0 surfaces as SingularError.
ScoreMatrix score_sparsegpt(const DenseMatrix& w, const DenseMatrix& x, double lambda);

// Max relative elementwise gap between w^2 * diag(x^T x) and
// score_wanda(w, l2 norms)^2 — the exact-reduction identity between the
// undamped diagonal second-order score and the squared first-order score.
double verify_reduction(const DenseMatrix& w, const DenseMatrix& x);

// Prunes floor(G * sparsity) entries per comparison group of size G, lowest
// scores first, ties broken toward the lower flat index.
PruneMask select_mask(const ScoreMatrix& s, const GroupingScheme& g, double sparsity);

// Keeps the n highest-scoring of every m consecutive inputs per row.
// Requires m to divide the column count.
PruneMask select_nm_mask(const ScoreMatrix& s, std::size_t n, std::size_t m);

// Zeroes pruned entries; kept entries are copied bit-identically.
DenseMatrix apply_mask(const DenseMatrix& w, const PruneMask& mask);

}  // namespace wanda

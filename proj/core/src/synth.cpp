// SPDX-License-Identifier: Apache-2.0
#include "wanda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wanda/errors.hpp"

namespace wanda {

namespace {

// Stream ids for Rng::derive.
constexpr std::uint64_t kStreamModel = 1;
constexpr std::uint64_t kStreamBatchBase = 2;
constexpr std::uint64_t kStreamOutlierCols = 3;

std::uint64_t splitmix_step(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Quantize to the nearest f32 so generated models/batches equal their saved
// form exactly.
double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t s = seed;
    std::uint64_t h = splitmix_step(s);
    s = h ^ (stream * 0x9E3779B97F4A7C15ull);
    h = splitmix_step(s);
    s = h ^ (index * 0xC2B2AE3D27D4EB4Full);
    return splitmix_step(s);
}

ModelCheckpoint gen_random_model(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2)
        throw ArgError("gen_random_model: need at least an input and an output width");
    for (std::size_t d : dims)
        if (d == 0) throw ArgError("gen_random_model: widths must be >= 1");

    ModelCheckpoint m;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        LinearLayer l;
        l.name = "fc" + std::to_string(k);
        l.c_in = dims[k];
        l.c_out = dims[k + 1];
        l.activation = (k + 2 < dims.size()) ? ActivationKind::relu : ActivationKind::none;
        l.weight = DenseMatrix(l.c_out, l.c_in);
        Rng rng(Rng::derive(seed, kStreamModel, k));
        const double scale = 1.0 / std::sqrt(static_cast<double>(l.c_in));
        for (double& v : l.weight.data) v = snap_f32(rng.normal() * scale);
        m.layers.push_back(std::move(l));
    }
    return m;
}

CalibrationBatch gen_outlier_batch(std::size_t n_tokens, std::size_t c_in, double outlier_frac,
                                   double outlier_scale, std::uint64_t seed) {
    if (n_tokens == 0 || c_in == 0)
        throw ArgError("gen_outlier_batch: n_tokens and c_in must be >= 1");
    if (!(outlier_frac >= 0.0 && outlier_frac <= 1.0))
        throw ArgError("gen_outlier_batch: outlier_frac must be in [0, 1], got " +
                       std::to_string(outlier_frac));
    if (!(outlier_scale > 0.0))
        throw ArgError("gen_outlier_batch: outlier_scale must be > 0");

    CalibrationBatch b;
    b.n_tokens = n_tokens;
    b.c_in = c_in;
    b.data = DenseMatrix(n_tokens, c_in);
    Rng base(Rng::derive(seed, kStreamBatchBase, 0));
    for (double& v : b.data.data) v = base.normal();

    const auto n_outliers = static_cast<std::size_t>(std::llround(outlier_frac * static_cast<double>(c_in)));
    if (n_outliers > 0) {
        // Partial Fisher-Yates: the first n_outliers entries are the chosen
        // columns, drawn without replacement.
        std::vector<std::size_t> cols(c_in);
        for (std::size_t j = 0; j < c_in; ++j) cols[j] = j;
        Rng pick(Rng::derive(seed, kStreamOutlierCols, 0));
        for (std::size_t i = 0; i < n_outliers; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(pick.uniform_int(c_in - i));
            std::swap(cols[i], cols[j]);
        }
        for (std::size_t i = 0; i < n_outliers; ++i) {
            const std::size_t c = cols[i];
            for (std::size_t t = 0; t < n_tokens; ++t) b.data.at(t, c) *= outlier_scale;
        }
    }
    for (double& v : b.data.data) v = snap_f32(v);
    return b;
}

}  // namespace wanda

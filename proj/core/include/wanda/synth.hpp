// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "wanda/store.hpp"

namespace wanda {

// Deterministic generator behind all synthetic fixtures. One user seed is
// split into independent streams (model layer k, batch base values, outlier
// column choice) through SplitMix64 mixing, and each stream drives a
// std::mt19937_64 whose raw 64-bit output is mapped to uniforms/normals by
// fixed arithmetic (Box-Muller), not by std::*_distribution, whose sequences
// are implementation-defined. Same seed, same values, every run.
class Rng {
public:
    explicit Rng(std::uint64_t stream_seed) : engine_(stream_seed) {}

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1), 53 random bits.
    double uniform();
    // Standard normal via Box-Muller; consumes uniforms in a fixed pattern.
    double normal();
    // Uniform integer in [0, bound), bound >= 1. Plain modulo: the tiny bias
    // is irrelevant for fixtures, determinism is what matters.
    std::uint64_t uniform_int(std::uint64_t bound) { return next_u64() % bound; }

    // Derives the seed of an independent stream from (user seed, stream id,
    // index within the stream family).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Random model with the given feature widths: dims = [d0, d1, ..., dL] gives
// L layers, layer k being dims[k+1] x dims[k]. Weights are i.i.d. zero-mean
// normal scaled by 1/sqrt(c_in); every layer but the last gets a ReLU.
// Generated values are quantized to f32 so the in-memory model equals its
// saved form bit-for-bit.
ModelCheckpoint gen_random_model(const std::vector<std::size_t>& dims, std::uint64_t seed);

// Calibration batch with emphasized feature dimensions: base values are
// i.i.d. standard normal, then round(outlier_frac * c_in) columns chosen by
// the seed (without replacement) are multiplied by outlier_scale. The base
// values for a given seed do not depend on outlier_frac or outlier_scale.
CalibrationBatch gen_outlier_batch(std::size_t n_tokens, std::size_t c_in, double outlier_frac,
                                   double outlier_scale, std::uint64_t seed);

}  // namespace wanda

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wanda/matrix.hpp"

namespace wanda {

enum class ActivationKind { none, relu };

const char* activation_name(ActivationKind k);

// One fully-connected layer: weight is c_out x c_in, row i holds the weights
// of output feature i. activation applies to this layer's output.
struct LinearLayer {
    std::string name;
    std::size_t c_out = 0;
    std::size_t c_in = 0;
    ActivationKind activation = ActivationKind::none;
    DenseMatrix weight;
};

// A stack of layers; layer k+1 consumes layer k's output, so shapes must
// chain (c_in[k+1] == c_out[k]).
struct ModelCheckpoint {
    std::vector<LinearLayer> layers;

    // Shape chain, per-layer weight shapes, finite values. Throws on violation.
    void validate() const;
};

// Calibration inputs: n_tokens rows of c_in features.
struct CalibrationBatch {
    std::size_t n_tokens = 0;
    std::size_t c_in = 0;
    DenseMatrix data;  // n_tokens x c_in
};

// Checkpoint directory layout: manifest.json describing the layers plus
// weights.bin holding all weights as little-endian f32, row-major, tightly
// packed in layer order. Saving is deterministic byte-for-byte; loading
// validates everything and never repairs.
void save_checkpoint(const ModelCheckpoint& m, const std::filesystem::path& dir);
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

// Calibration file: "CALB" magic, u32le version=1, u32le n_tokens,
// u32le c_in, then n_tokens*c_in little-endian f32 values row-major.
void save_calibration(const CalibrationBatch& b, const std::filesystem::path& file);
CalibrationBatch load_calibration(const std::filesystem::path& file);

}  // namespace wanda

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wanda/store.hpp"
#include "wanda/update.hpp"

namespace wanda {

struct PruneConfig {
    std::string name = "default";
    MetricKind metric = MetricKind::wanda;
    NormKind norm = NormKind::l2;       // wanda only
    std::optional<double> lambda;       // nullopt = auto (0.01 * mean diag of x^T x)
    GroupingScheme grouping = GroupingScheme::per_output();
    SparsityTarget target = SparsityTarget::from_ratio(0.0);
    UpdatePolicy update = UpdatePolicy::none();
    std::uint64_t seed = 0;  // recorded in reports; pruning itself is deterministic

    // Rejects combinations that have no defined meaning (N:M with a grouping
    // other than per-output, N:M with the iterative update).
    void validate() const;
};

struct LayerRecord {
    std::string layer_name;
    SparsityTarget target;
    double achieved_sparsity = 0.0;
    double recon_error_fro = 0.0;
    double recon_error_rel = 0.0;
    double metric_time_ms = 0.0;  // for iterative runs: the fused prune+update pass
};

struct ReportTotals {
    std::size_t total_weights = 0;
    std::size_t total_pruned = 0;
    double achieved_sparsity = 0.0;
    double recon_error_fro_sum = 0.0;
    double recon_error_rel_sum = 0.0;
    double recon_error_rel_mean = 0.0;
    double output_error_rel = 0.0;  // final pruned output vs the dense reference
    double metric_time_ms_total = 0.0;
};

struct PruneReport {
    std::vector<LayerRecord> layers;
    ReportTotals totals;
};

struct PruneResult {
    ModelCheckpoint model;
    PruneReport report;
};

// Inputs each layer sees when the dense model consumes the batch: element k
// is the activation matrix entering layer k. Throws NonFiniteError if any
// activation overflows, naming the layer.
std::vector<DenseMatrix> forward_collect(const ModelCheckpoint& m, const CalibrationBatch& b);

// Final output of the model on the batch (same overflow checks).
DenseMatrix forward_output(const ModelCheckpoint& m, const CalibrationBatch& b);

// One-shot pruning pass: walks the layers in order, scores each against its
// live (post-pruning, propagated) input activations, selects and applies the
// mask per cfg, and records per-layer reconstruction errors against those
// same live inputs.
PruneResult prune_model(const ModelCheckpoint& m, const CalibrationBatch& b,
                        const PruneConfig& cfg);

// (Frobenius, relative) error between x w^T and x w_pruned^T.
std::pair<double, double> recon_error(const DenseMatrix& w, const DenseMatrix& w_pruned,
                                      const DenseMatrix& x);

// Exhaustive best mask for one row: tries every way to prune prune_count of
// the row's weights and minimizes || x w' - x w ||_2 (pruned entries zeroed,
// kept entries unchanged). Ties go to the lexicographically smallest pruned
// index set. Row width is capped at 20.
struct OracleRowResult {
    std::vector<std::uint8_t> kept;
    std::vector<std::size_t> pruned;  // ascending
    double error = 0.0;
};
OracleRowResult oracle_best_mask_row(const std::vector<double>& w_row, const DenseMatrix& x,
                                     std::size_t prune_count);

struct ComparisonRow {
    PruneConfig config;
    PruneReport report;
};

// prune_model once per config on the same model and batch.
std::vector<ComparisonRow> compare_methods(const ModelCheckpoint& m, const CalibrationBatch& b,
                                           const std::vector<PruneConfig>& configs);

// --- report/config serialization -------------------------------------------

std::string grouping_to_string(const GroupingScheme& g);
GroupingScheme grouping_from_string(const std::string& s);
std::string update_to_string(const UpdatePolicy& u);
UpdatePolicy update_from_string(const std::string& s);
std::string target_to_string(const SparsityTarget& t);
MetricKind metric_from_string(const std::string& s);
NormKind norm_from_string(const std::string& s);

// Pretty-printed JSON report (snake_case keys throughout).
std::string report_to_json(const PruneConfig& cfg, const PruneReport& r);
std::string comparison_to_json(const std::vector<ComparisonRow>& rows);

// One CSV row per (config, layer) with a fixed header.
std::string comparison_to_csv(const std::vector<ComparisonRow>& rows);

// Parses a JSON array of config objects (the `compare` config file). Keys:
// name, method, sparsity or nm, group, update, lambda ("auto" or number),
// norm, seed; everything except method and sparsity/nm is optional.
std::vector<PruneConfig> configs_from_json(const std::string& text);

}  // namespace wanda

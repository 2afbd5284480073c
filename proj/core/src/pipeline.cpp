// SPDX-License-Identifier: Apache-2.0
#include "wanda/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include <json.hpp>

#include "wanda/errors.hpp"

namespace wanda {

namespace {

using nlohmann::json;
using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

double fro_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

double fro_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

void apply_activation(DenseMatrix& y, ActivationKind k) {
    if (k == ActivationKind::relu)
        for (double& v : y.data) v = v < 0.0 ? 0.0 : v;
}

void check_activations(const DenseMatrix& y, const std::string& layer_name) {
    if (!y.all_finite())
        throw NonFiniteError("activations after layer '" + layer_name + "' are not finite");
}

void check_batch(const ModelCheckpoint& m, const CalibrationBatch& b) {
    if (b.data.rows != b.n_tokens || b.data.cols != b.c_in)
        throw ShapeError("calibration data shape does not match its header");
    if (b.c_in != m.layers.front().c_in)
        throw ShapeError("calibration width " + std::to_string(b.c_in) +
                         " does not match the model input width " +
                         std::to_string(m.layers.front().c_in));
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json target_to_json(const SparsityTarget& t) {
    if (t.kind == SparsityTarget::Kind::ratio)
        return {{"type", "ratio"}, {"value", t.ratio}};
    return {{"type", "nm"}, {"n", t.n}, {"m", t.m}};
}

json config_to_json(const PruneConfig& cfg) {
    json j = {{"name", cfg.name},
              {"method", metric_name(cfg.metric)},
              {"norm", norm_name(cfg.norm)},
              {"group", grouping_to_string(cfg.grouping)},
              {"target", target_to_json(cfg.target)},
              {"update", update_to_string(cfg.update)},
              {"seed", cfg.seed}};
    if (cfg.lambda.has_value())
        j["lambda"] = *cfg.lambda;
    else
        j["lambda"] = "auto";
    return j;
}

json report_to_json_obj(const PruneConfig& cfg, const PruneReport& r) {
    json layers = json::array();
    for (const LayerRecord& l : r.layers)
        layers.push_back({{"layer_name", l.layer_name},
                          {"target", target_to_json(l.target)},
                          {"achieved_sparsity", l.achieved_sparsity},
                          {"recon_error_fro", l.recon_error_fro},
                          {"recon_error_rel", l.recon_error_rel},
                          {"metric_time_ms", l.metric_time_ms}});
    const ReportTotals& t = r.totals;
    json totals = {{"total_weights", t.total_weights},
                   {"total_pruned", t.total_pruned},
                   {"achieved_sparsity", t.achieved_sparsity},
                   {"recon_error_fro_sum", t.recon_error_fro_sum},
                   {"recon_error_rel_sum", t.recon_error_rel_sum},
                   {"recon_error_rel_mean", t.recon_error_rel_mean},
                   {"output_error_rel", t.output_error_rel},
                   {"metric_time_ms_total", t.metric_time_ms_total}};
    return {{"config", config_to_json(cfg)}, {"layers", layers}, {"totals", totals}};
}

}  // namespace

void PruneConfig::validate() const {
    if (target.kind == SparsityTarget::Kind::structured_nm) {
        if (grouping.kind != GroupingScheme::Kind::per_output)
            throw ConfigError("structured n:m targets require per-output grouping");
        if (update.kind == UpdatePolicy::Kind::iterative)
            throw ConfigError("structured n:m targets cannot be combined with the iterative update");
    }
    if (lambda.has_value() && !(*lambda >= 0.0))
        throw ConfigError("lambda must be >= 0 or \"auto\"");
}

std::vector<DenseMatrix> forward_collect(const ModelCheckpoint& m, const CalibrationBatch& b) {
    m.validate();
    check_batch(m, b);
    std::vector<DenseMatrix> inputs;
    inputs.reserve(m.layers.size());
    DenseMatrix x = b.data;
    for (const LinearLayer& l : m.layers) {
        inputs.push_back(x);
        DenseMatrix y = matmul_bt(x, l.weight);
        apply_activation(y, l.activation);
        check_activations(y, l.name);
        x = std::move(y);
    }
    return inputs;
}

DenseMatrix forward_output(const ModelCheckpoint& m, const CalibrationBatch& b) {
    m.validate();
    check_batch(m, b);
    DenseMatrix x = b.data;
    for (const LinearLayer& l : m.layers) {
        DenseMatrix y = matmul_bt(x, l.weight);
        apply_activation(y, l.activation);
        check_activations(y, l.name);
        x = std::move(y);
    }
    return x;
}

std::pair<double, double> recon_error(const DenseMatrix& w, const DenseMatrix& w_pruned,
                                      const DenseMatrix& x) {
    if (!same_shape(w, w_pruned))
        throw ShapeError("recon_error: weight shapes differ");
    if (x.cols != w.cols)
        throw ShapeError("recon_error: calibration has " + std::to_string(x.cols) +
                         " features but weights have " + std::to_string(w.cols));
    const DenseMatrix ref = matmul_bt(x, w);
    const DenseMatrix got = matmul_bt(x, w_pruned);
    const double fro = fro_diff(ref, got);
    return {fro, fro / std::max(fro_norm(ref), 1e-12)};
}

PruneResult prune_model(const ModelCheckpoint& m, const CalibrationBatch& b,
                        const PruneConfig& cfg) {
    cfg.validate();
    m.validate();
    check_batch(m, b);

    PruneResult res;
    res.model = m;
    DenseMatrix x = b.data;        // live inputs, sees pruned upstream layers
    DenseMatrix x_dense = b.data;  // dense reference chain

    for (std::size_t k = 0; k < m.layers.size(); ++k) {
        const LinearLayer& layer = m.layers[k];
        const DenseMatrix& w = layer.weight;
        const double lambda = resolve_lambda(x, cfg.lambda);

        DenseMatrix w_pruned;
        PruneMask mask;
        double metric_ms = 0.0;
        if (cfg.update.kind == UpdatePolicy::Kind::iterative) {
            const auto t0 = clock_type::now();
            auto [wp, mk] = iterative_prune_update(w, x, cfg.metric, cfg.norm, cfg.target.ratio,
                                                  cfg.update.blocksize, lambda);
            metric_ms = ms_since(t0);
            w_pruned = std::move(wp);
            mask = std::move(mk);
        } else {
            const auto t0 = clock_type::now();
            ScoreMatrix scores;
            switch (cfg.metric) {
                case MetricKind::magnitude: scores = score_magnitude(w); break;
                case MetricKind::wanda: scores = score_wanda(w, column_norms(x, cfg.norm)); break;
                case MetricKind::sparsegpt: scores = score_sparsegpt(w, x, lambda); break;
            }
            metric_ms = ms_since(t0);
            mask = cfg.target.kind == SparsityTarget::Kind::ratio
                       ? select_mask(scores, cfg.grouping, cfg.target.ratio)
                       : select_nm_mask(scores, cfg.target.n, cfg.target.m);
            w_pruned = cfg.update.kind == UpdatePolicy::Kind::none
                           ? apply_mask(w, mask)
                           : sequential_update(w, mask, build_hessian(x, lambda));
        }

        const DenseMatrix y_ref = matmul_bt(x, w);
        DenseMatrix y_pruned = matmul_bt(x, w_pruned);
        const double fro = fro_diff(y_ref, y_pruned);
        const double rel = fro / std::max(fro_norm(y_ref), 1e-12);

        LayerRecord rec;
        rec.layer_name = layer.name;
        rec.target = cfg.target;
        rec.achieved_sparsity = static_cast<double>(mask.pruned_count()) /
                                static_cast<double>(w.rows * w.cols);
        rec.recon_error_fro = fro;
        rec.recon_error_rel = rel;
        rec.metric_time_ms = metric_ms;
        res.report.layers.push_back(rec);

        res.report.totals.total_weights += w.rows * w.cols;
        res.report.totals.total_pruned += mask.pruned_count();
        res.report.totals.recon_error_fro_sum += fro;
        res.report.totals.recon_error_rel_sum += rel;
        res.report.totals.metric_time_ms_total += metric_ms;

        res.model.layers[k].weight = std::move(w_pruned);

        apply_activation(y_pruned, layer.activation);
        check_activations(y_pruned, layer.name);
        x = std::move(y_pruned);

        DenseMatrix y_dense = matmul_bt(x_dense, w);
        apply_activation(y_dense, layer.activation);
        check_activations(y_dense, layer.name);
        x_dense = std::move(y_dense);
    }

    ReportTotals& t = res.report.totals;
    t.achieved_sparsity = static_cast<double>(t.total_pruned) / static_cast<double>(t.total_weights);
    t.recon_error_rel_mean = t.recon_error_rel_sum / static_cast<double>(res.report.layers.size());
    t.output_error_rel = fro_diff(x_dense, x) / std::max(fro_norm(x_dense), 1e-12);
    return res;
}

OracleRowResult oracle_best_mask_row(const std::vector<double>& w_row, const DenseMatrix& x,
                                     std::size_t prune_count) {
    const std::size_t n = w_row.size();
    if (n == 0) throw ShapeError("oracle_best_mask_row: empty row");
    if (x.cols != n)
        throw ShapeError("oracle_best_mask_row: calibration has " + std::to_string(x.cols) +
                         " features but the row has " + std::to_string(n));
    if (n > 20)
        throw ArgError("oracle_best_mask_row: exhaustive search is capped at 20 inputs, got " +
                       std::to_string(n));
    if (prune_count > n)
        throw ArgError("oracle_best_mask_row: cannot prune " + std::to_string(prune_count) +
                       " of " + std::to_string(n) + " weights");

    OracleRowResult best;
    best.kept.assign(n, 1);
    if (prune_count == 0) {
        best.error = 0.0;
        return best;
    }

    const DenseMatrix g = gram(x);
    const std::size_t k = prune_count;
    std::vector<std::size_t> comb(k);
    std::iota(comb.begin(), comb.end(), std::size_t{0});
    double best_e2 = -1.0;
    bool more = true;
    while (more) {
        // || sum_{j in P} w_j x_j ||^2 through the Gram matrix.
        double e2 = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            const double wa = w_row[comb[a]];
            e2 += wa * wa * g.at(comb[a], comb[a]);
            for (std::size_t b2 = a + 1; b2 < k; ++b2)
                e2 += 2.0 * wa * w_row[comb[b2]] * g.at(comb[a], comb[b2]);
        }
        if (best_e2 < 0.0 || e2 < best_e2) {
            best_e2 = e2;
            best.pruned = comb;
        }
        // next combination in lexicographic order
        more = false;
        for (std::size_t i = k; i-- > 0;) {
            if (comb[i] != i + n - k) {
                ++comb[i];
                for (std::size_t j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
                more = true;
                break;
            }
        }
    }
    for (std::size_t j : best.pruned) best.kept[j] = 0;
    best.error = std::sqrt(std::max(0.0, best_e2));
    return best;
}

std::vector<ComparisonRow> compare_methods(const ModelCheckpoint& m, const CalibrationBatch& b,
                                           const std::vector<PruneConfig>& configs) {
    std::vector<ComparisonRow> rows;
    rows.reserve(configs.size());
    for (const PruneConfig& cfg : configs)
        rows.push_back({cfg, prune_model(m, b, cfg).report});
    return rows;
}

// --- serialization ----------------------------------------------------------

std::string grouping_to_string(const GroupingScheme& g) {
    switch (g.kind) {
        case GroupingScheme::Kind::per_layer: return "per-layer";
        case GroupingScheme::Kind::per_output: return "per-output";
        case GroupingScheme::Kind::per_input: return "per-input";
        case GroupingScheme::Kind::blocked:
            return (g.axis == GroupingScheme::Axis::input ? "in:" : "out:") +
                   std::to_string(g.blocksize);
    }
    return "?";
}

GroupingScheme grouping_from_string(const std::string& s) {
    if (s == "per-layer") return GroupingScheme::per_layer();
    if (s == "per-output") return GroupingScheme::per_output();
    if (s == "per-input") return GroupingScheme::per_input();
    for (const char* prefix : {"in:", "out:"}) {
        if (s.rfind(prefix, 0) == 0) {
            const std::string num = s.substr(std::string(prefix).size());
            char* end = nullptr;
            const unsigned long long v = std::strtoull(num.c_str(), &end, 10);
            if (num.empty() || end == nullptr || *end != '\0' || v == 0)
                throw ConfigError("bad group blocksize in \"" + s + "\"");
            return GroupingScheme::blocked(prefix[0] == 'i' ? GroupingScheme::Axis::input
                                                            : GroupingScheme::Axis::output,
                                           static_cast<std::size_t>(v));
        }
    }
    throw ConfigError("unknown group \"" + s +
                      "\" (expected per-output, per-layer, per-input, in:K, out:K)");
}

std::string update_to_string(const UpdatePolicy& u) {
    switch (u.kind) {
        case UpdatePolicy::Kind::none: return "none";
        case UpdatePolicy::Kind::sequential: return "sequential";
        case UpdatePolicy::Kind::iterative: return "iterative:" + std::to_string(u.blocksize);
    }
    return "?";
}

UpdatePolicy update_from_string(const std::string& s) {
    if (s == "none") return UpdatePolicy::none();
    if (s == "sequential") return UpdatePolicy::sequential();
    if (s == "iterative") return UpdatePolicy::iterative(128);
    if (s.rfind("iterative:", 0) == 0) {
        const std::string num = s.substr(10);
        char* end = nullptr;
        const unsigned long long v = std::strtoull(num.c_str(), &end, 10);
        if (num.empty() || end == nullptr || *end != '\0' || v == 0)
            throw ConfigError("bad iterative blocksize in \"" + s + "\"");
        return UpdatePolicy::iterative(static_cast<std::size_t>(v));
    }
    throw ConfigError("unknown update \"" + s +
                      "\" (expected none, sequential, iterative, iterative:K)");
}

std::string target_to_string(const SparsityTarget& t) {
    if (t.kind == SparsityTarget::Kind::ratio) return "ratio:" + fmt_double(t.ratio);
    return "nm:" + std::to_string(t.n) + ":" + std::to_string(t.m);
}

MetricKind metric_from_string(const std::string& s) {
    if (s == "magnitude") return MetricKind::magnitude;
    if (s == "wanda") return MetricKind::wanda;
    if (s == "sparsegpt") return MetricKind::sparsegpt;
    throw ConfigError("unknown method \"" + s + "\" (expected magnitude, wanda, sparsegpt)");
}

NormKind norm_from_string(const std::string& s) {
    if (s == "l1") return NormKind::l1;
    if (s == "l2") return NormKind::l2;
    if (s == "linf") return NormKind::linf;
    throw ConfigError("unknown norm \"" + s + "\" (expected l1, l2, linf)");
}

std::string report_to_json(const PruneConfig& cfg, const PruneReport& r) {
    return report_to_json_obj(cfg, r).dump(2) + "\n";
}

std::string comparison_to_json(const std::vector<ComparisonRow>& rows) {
    json arr = json::array();
    for (const ComparisonRow& row : rows) arr.push_back(report_to_json_obj(row.config, row.report));
    return json{{"configs", arr}}.dump(2) + "\n";
}

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "config,layer,target,achieved_sparsity,recon_error_fro,recon_error_rel,metric_time_ms\n";
    for (const ComparisonRow& row : rows) {
        for (const LayerRecord& l : row.report.layers) {
            out += row.config.name;
            out += ',';
            out += l.layer_name;
            out += ',';
            out += target_to_string(l.target);
            out += ',';
            out += fmt_double(l.achieved_sparsity);
            out += ',';
            out += fmt_double(l.recon_error_fro);
            out += ',';
            out += fmt_double(l.recon_error_rel);
            out += ',';
            out += fmt_double(l.metric_time_ms);
            out += '\n';
        }
    }
    return out;
}

std::vector<PruneConfig> configs_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
    }
    if (!root.is_array() || root.empty())
        throw ConfigError("config file must be a nonempty JSON array of config objects");

    std::vector<PruneConfig> configs;
    std::size_t idx = 0;
    for (const json& e : root) {
        const std::string where = "config " + std::to_string(idx);
        if (!e.is_object()) throw ConfigError(where + ": must be an object");
        PruneConfig cfg;
        cfg.name = e.value("name", "cfg" + std::to_string(idx));
        if (!e.contains("method") || !e["method"].is_string())
            throw ConfigError(where + ": missing string \"method\"");
        cfg.metric = metric_from_string(e["method"].get<std::string>());
        const bool has_s = e.contains("sparsity");
        const bool has_nm = e.contains("nm");
        if (has_s == has_nm)
            throw ConfigError(where + ": exactly one of \"sparsity\" or \"nm\" is required");
        if (has_s) {
            if (!e["sparsity"].is_number())
                throw ConfigError(where + ": \"sparsity\" must be a number");
            cfg.target = SparsityTarget::from_ratio(e["sparsity"].get<double>());
        } else {
            if (!e["nm"].is_string()) throw ConfigError(where + ": \"nm\" must be a string n:m");
            const std::string nm = e["nm"].get<std::string>();
            const auto colon = nm.find(':');
            if (colon == std::string::npos)
                throw ConfigError(where + ": \"nm\" must look like \"2:4\"");
            try {
                cfg.target = SparsityTarget::from_nm(std::stoull(nm.substr(0, colon)),
                                                     std::stoull(nm.substr(colon + 1)));
            } catch (const ArgError&) {
                throw;
            } catch (const std::exception&) {
                throw ConfigError(where + ": \"nm\" must look like \"2:4\"");
            }
        }
        if (e.contains("group")) cfg.grouping = grouping_from_string(e["group"].get<std::string>());
        if (e.contains("update")) cfg.update = update_from_string(e["update"].get<std::string>());
        if (e.contains("norm")) cfg.norm = norm_from_string(e["norm"].get<std::string>());
        if (e.contains("lambda")) {
            const json& l = e["lambda"];
            if (l.is_string() && l.get<std::string>() == "auto")
                cfg.lambda.reset();
            else if (l.is_number())
                cfg.lambda = l.get<double>();
            else
                throw ConfigError(where + ": \"lambda\" must be a number or \"auto\"");
        }
        if (e.contains("seed")) {
            if (!e["seed"].is_number_unsigned())
                throw ConfigError(where + ": \"seed\" must be a nonnegative integer");
            cfg.seed = e["seed"].get<std::uint64_t>();
        }
        cfg.validate();
        configs.push_back(std::move(cfg));
        ++idx;
    }
    return configs;
}

}  // namespace wanda

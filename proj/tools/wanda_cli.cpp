// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: generate fixtures, prune, evaluate, compare, and run
// the exhaustive oracle. Exit codes: 0 success, 2 usage/config error,
// 3 numerical failure, 4 I/O error.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wanda/errors.hpp"
#include "wanda/linalg.hpp"
#include "wanda/parallel.hpp"
#include "wanda/pipeline.hpp"
#include "wanda/prune.hpp"
#include "wanda/store.hpp"
#include "wanda/synth.hpp"
#include "wanda/update.hpp"

namespace {

using nlohmann::json;

std::vector<std::size_t> parse_dims(const std::string& s) {
    std::vector<std::size_t> dims;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(item.c_str(), &end, 10);
        if (item.empty() || end == nullptr || *end != '\0' || v == 0)
            throw wanda::ArgError("bad --dims entry \"" + item + "\" (want positive integers)");
        dims.push_back(static_cast<std::size_t>(v));
    }
    if (dims.empty()) throw wanda::ArgError("--dims must list at least two widths");
    return dims;
}

std::pair<std::size_t, std::size_t> parse_nm(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw wanda::ArgError("--nm must look like N:M, e.g. 2:4");
    char* end = nullptr;
    const unsigned long long n = std::strtoull(s.c_str(), &end, 10);
    if (end == nullptr || *end != ':') throw wanda::ArgError("--nm must look like N:M, e.g. 2:4");
    const char* mp = end + 1;
    const unsigned long long m = std::strtoull(mp, &end, 10);
    if (*mp == '\0' || end == nullptr || *end != '\0')
        throw wanda::ArgError("--nm must look like N:M, e.g. 2:4");
    return {static_cast<std::size_t>(n), static_cast<std::size_t>(m)};
}

std::optional<double> parse_lambda(const std::string& s) {
    if (s == "auto") return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end == nullptr || *end != '\0')
        throw wanda::ArgError("--lambda must be \"auto\" or a nonnegative real, got \"" + s + "\"");
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw wanda::IoError("cannot open " + path, path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw wanda::IoError("cannot open " + path + " for writing", path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw wanda::IoError("short write to " + path, path);
}

void emit(const std::string& text, const std::string& report_path) {
    if (!report_path.empty()) write_file(report_path, text);
    std::fputs(text.c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-shot pruning of layered linear models by weights and activations"};
    app.require_subcommand(1);
    app.fallthrough();

    unsigned threads = 1;
    app.add_option("--threads", threads, "worker threads; results are identical for any count")
        ->check(CLI::Range(1u, 1024u));

    int rc = 0;

    // gen-model
    auto* gm = app.add_subcommand("gen-model", "write a random model checkpoint");
    std::string gm_dims, gm_out;
    std::uint64_t gm_seed = 0;
    gm->add_option("--dims", gm_dims, "comma-separated feature widths, e.g. 64,64,64")->required();
    gm->add_option("--seed", gm_seed, "generator seed");
    gm->add_option("--out", gm_out, "checkpoint directory to create")->required();
    gm->callback([&] {
        wanda::set_num_threads(threads);
        const wanda::ModelCheckpoint m = wanda::gen_random_model(parse_dims(gm_dims), gm_seed);
        wanda::save_checkpoint(m, gm_out);
        std::printf("wrote %s (%zu layers)\n", gm_out.c_str(), m.layers.size());
    });

    // gen-calib
    auto* gc = app.add_subcommand("gen-calib", "write a calibration batch with outlier features");
    std::size_t gc_tokens = 0, gc_dim = 0;
    double gc_frac = 0.0625, gc_scale = 100.0;
    std::uint64_t gc_seed = 0;
    std::string gc_out;
    gc->add_option("--tokens", gc_tokens, "number of calibration rows")->required();
    gc->add_option("--dim", gc_dim, "feature width")->required();
    gc->add_option("--outlier-frac", gc_frac, "fraction of feature columns scaled up");
    gc->add_option("--outlier-scale", gc_scale, "multiplier for outlier columns");
    gc->add_option("--seed", gc_seed, "generator seed");
    gc->add_option("--out", gc_out, "calibration file to write")->required();
    gc->callback([&] {
        wanda::set_num_threads(threads);
        const wanda::CalibrationBatch b =
            wanda::gen_outlier_batch(gc_tokens, gc_dim, gc_frac, gc_scale, gc_seed);
        wanda::save_calibration(b, gc_out);
        std::printf("wrote %s (%zu x %zu)\n", gc_out.c_str(), b.n_tokens, b.c_in);
    });

    // prune
    auto* pr = app.add_subcommand("prune", "prune a checkpoint against a calibration batch");
    std::string pr_model, pr_calib, pr_method, pr_group = "per-output", pr_nm,
                pr_update = "none", pr_lambda = "auto", pr_norm = "l2", pr_out, pr_report;
    double pr_sparsity = 0.0;
    pr->add_option("--model", pr_model, "input checkpoint directory")->required();
    pr->add_option("--calib", pr_calib, "calibration file")->required();
    pr->add_option("--method", pr_method, "magnitude | wanda | sparsegpt")->required();
    pr->add_option("--group", pr_group, "per-output | per-layer | per-input | in:K | out:K");
    auto* pr_s_opt = pr->add_option("--sparsity", pr_sparsity, "fraction to prune per group, in [0,1)");
    auto* pr_nm_opt = pr->add_option("--nm", pr_nm, "structured target N:M, e.g. 2:4");
    pr_s_opt->excludes(pr_nm_opt);
    pr_nm_opt->excludes(pr_s_opt);
    pr->add_option("--update", pr_update, "none | sequential | iterative[:K]");
    pr->add_option("--lambda", pr_lambda, "Hessian damping: auto = 0.01 * mean diag");
    pr->add_option("--norm", pr_norm, "activation norm for wanda: l1 | l2 | linf");
    pr->add_option("--out", pr_out, "pruned checkpoint directory")->required();
    pr->add_option("--report", pr_report, "also write the JSON report here");
    pr->callback([&] {
        wanda::set_num_threads(threads);
        wanda::PruneConfig cfg;
        cfg.name = pr_method;
        cfg.metric = wanda::metric_from_string(pr_method);
        cfg.norm = wanda::norm_from_string(pr_norm);
        cfg.grouping = wanda::grouping_from_string(pr_group);
        cfg.update = wanda::update_from_string(pr_update);
        cfg.lambda = parse_lambda(pr_lambda);
        if (pr_s_opt->count() > 0)
            cfg.target = wanda::SparsityTarget::from_ratio(pr_sparsity);
        else if (pr_nm_opt->count() > 0) {
            const auto [n, m] = parse_nm(pr_nm);
            cfg.target = wanda::SparsityTarget::from_nm(n, m);
        } else {
            throw wanda::ArgError("one of --sparsity or --nm is required");
        }
        const wanda::ModelCheckpoint m = wanda::load_checkpoint(pr_model);
        const wanda::CalibrationBatch b = wanda::load_calibration(pr_calib);
        wanda::PruneResult res = wanda::prune_model(m, b, cfg);
        wanda::save_checkpoint(res.model, pr_out);
        emit(wanda::report_to_json(cfg, res.report), pr_report);
    });

    // eval
    auto* ev = app.add_subcommand("eval", "reconstruction errors of a pruned model vs its dense original");
    std::string ev_model, ev_pruned, ev_calib, ev_report;
    ev->add_option("--model", ev_model, "dense checkpoint directory")->required();
    ev->add_option("--pruned", ev_pruned, "pruned checkpoint directory")->required();
    ev->add_option("--calib", ev_calib, "calibration file")->required();
    ev->add_option("--report", ev_report, "also write the JSON report here");
    ev->callback([&] {
        wanda::set_num_threads(threads);
        const wanda::ModelCheckpoint dense = wanda::load_checkpoint(ev_model);
        const wanda::ModelCheckpoint pruned = wanda::load_checkpoint(ev_pruned);
        const wanda::CalibrationBatch b = wanda::load_calibration(ev_calib);
        if (dense.layers.size() != pruned.layers.size())
            throw wanda::ShapeError("models have different layer counts");
        for (std::size_t k = 0; k < dense.layers.size(); ++k)
            if (!wanda::same_shape(dense.layers[k].weight, pruned.layers[k].weight))
                throw wanda::ShapeError("layer '" + dense.layers[k].name +
                                        "' has different shapes in the two models");
        const std::vector<wanda::DenseMatrix> inputs = wanda::forward_collect(dense, b);
        json layers = json::array();
        double fro_sum = 0.0, rel_sum = 0.0;
        for (std::size_t k = 0; k < dense.layers.size(); ++k) {
            const auto [fro, rel] = wanda::recon_error(dense.layers[k].weight,
                                                       pruned.layers[k].weight, inputs[k]);
            fro_sum += fro;
            rel_sum += rel;
            layers.push_back({{"layer_name", dense.layers[k].name},
                              {"recon_error_fro", fro},
                              {"recon_error_rel", rel}});
        }
        const wanda::DenseMatrix y_dense = wanda::forward_output(dense, b);
        const wanda::DenseMatrix y_pruned = wanda::forward_output(pruned, b);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < y_dense.data.size(); ++i) {
            const double d = y_dense.data[i] - y_pruned.data[i];
            num += d * d;
            den += y_dense.data[i] * y_dense.data[i];
        }
        const json out = {
            {"layers", layers},
            {"totals",
             {{"recon_error_fro_sum", fro_sum},
              {"recon_error_rel_sum", rel_sum},
              {"recon_error_rel_mean", rel_sum / static_cast<double>(dense.layers.size())},
              {"output_error_rel", std::sqrt(num) / std::max(std::sqrt(den), 1e-12)}}}};
        emit(out.dump(2) + "\n", ev_report);
    });

    // compare
    auto* cm = app.add_subcommand("compare", "run a matrix of prune configs on one model and batch");
    std::string cm_model, cm_calib, cm_configs, cm_report, cm_csv;
    cm->add_option("--model", cm_model, "checkpoint directory")->required();
    cm->add_option("--calib", cm_calib, "calibration file")->required();
    cm->add_option("--configs", cm_configs, "JSON array of config objects")->required();
    cm->add_option("--report", cm_report, "also write the JSON comparison here");
    cm->add_option("--csv", cm_csv, "write a CSV with one row per (config, layer)");
    cm->callback([&] {
        wanda::set_num_threads(threads);
        const std::vector<wanda::PruneConfig> configs =
            wanda::configs_from_json(read_file(cm_configs));
        const wanda::ModelCheckpoint m = wanda::load_checkpoint(cm_model);
        const wanda::CalibrationBatch b = wanda::load_calibration(cm_calib);
        const std::vector<wanda::ComparisonRow> rows = wanda::compare_methods(m, b, configs);
        if (!cm_csv.empty()) write_file(cm_csv, wanda::comparison_to_csv(rows));
        emit(wanda::comparison_to_json(rows), cm_report);
    });

    // check-reduction
    auto* cr = app.add_subcommand(
        "check-reduction",
        "max relative gap between w^2 * diag(x^T x) and the squared wanda score");
    std::size_t cr_rows = 64, cr_cols = 64, cr_tokens = 256;
    std::uint64_t cr_seed = 0;
    cr->add_option("--rows", cr_rows, "weight rows");
    cr->add_option("--cols", cr_cols, "weight columns = feature width");
    cr->add_option("--tokens", cr_tokens, "calibration rows");
    cr->add_option("--seed", cr_seed, "generator seed");
    cr->callback([&] {
        wanda::set_num_threads(threads);
        const wanda::ModelCheckpoint m = wanda::gen_random_model({cr_cols, cr_rows}, cr_seed);
        const wanda::CalibrationBatch b =
            wanda::gen_outlier_batch(cr_tokens, cr_cols, 0.0625, 100.0, cr_seed);
        const double gap = wanda::verify_reduction(m.layers[0].weight, b.data);
        std::printf("%.17g\n", gap);
        if (!(gap < 1e-6)) rc = 3;
    });

    // oracle
    auto* orc = app.add_subcommand("oracle",
                                   "per-method selection error vs the exhaustive optimum");
    std::size_t orc_cin = 0, orc_rows = 100;
    double orc_sparsity = 0.5;
    std::uint64_t orc_seed = 0;
    orc->add_option("--cin", orc_cin, "inputs per row (max 12)")->required();
    orc->add_option("--rows", orc_rows, "number of random rows");
    orc->add_option("--sparsity", orc_sparsity, "fraction pruned per row");
    orc->add_option("--seed", orc_seed, "generator seed");
    orc->callback([&] {
        wanda::set_num_threads(threads);
        if (orc_cin > 12)
            throw wanda::ArgError("--cin is capped at 12 for the exhaustive oracle, got " +
                                  std::to_string(orc_cin));
        if (orc_cin == 0 || orc_rows == 0) throw wanda::ArgError("--cin and --rows must be >= 1");
        const std::size_t tokens = 64;
        const wanda::ModelCheckpoint m = wanda::gen_random_model({orc_cin, orc_rows}, orc_seed);
        const wanda::DenseMatrix& w = m.layers[0].weight;
        const wanda::CalibrationBatch b =
            wanda::gen_outlier_batch(tokens, orc_cin, 0.0625, 100.0, orc_seed);
        const wanda::DenseMatrix g = wanda::gram(b.data);
        const std::size_t prune_count =
            static_cast<std::size_t>(std::floor(static_cast<double>(orc_cin) * orc_sparsity));

        const auto row_error = [&](std::size_t r, const std::vector<std::size_t>& pruned) {
            double e2 = 0.0;
            for (std::size_t a = 0; a < pruned.size(); ++a) {
                const double wa = w.at(r, pruned[a]);
                e2 += wa * wa * g.at(pruned[a], pruned[a]);
                for (std::size_t c = a + 1; c < pruned.size(); ++c)
                    e2 += 2.0 * wa * w.at(r, pruned[c]) * g.at(pruned[a], pruned[c]);
            }
            return std::sqrt(std::max(0.0, e2));
        };

        std::vector<std::vector<std::size_t>> oracle_pruned(orc_rows);
        double oracle_sum = 0.0;
        for (std::size_t r = 0; r < orc_rows; ++r) {
            std::vector<double> row(w.row(r), w.row(r) + orc_cin);
            wanda::OracleRowResult best = wanda::oracle_best_mask_row(row, b.data, prune_count);
            oracle_sum += best.error;
            oracle_pruned[r] = std::move(best.pruned);
        }

        json methods;
        for (const wanda::MetricKind metric :
             {wanda::MetricKind::magnitude, wanda::MetricKind::wanda,
              wanda::MetricKind::sparsegpt}) {
            wanda::ScoreMatrix scores;
            switch (metric) {
                case wanda::MetricKind::magnitude: scores = wanda::score_magnitude(w); break;
                case wanda::MetricKind::wanda:
                    scores = wanda::score_wanda(w, wanda::column_norms(b.data, wanda::NormKind::l2));
                    break;
                case wanda::MetricKind::sparsegpt:
                    scores = wanda::score_sparsegpt(w, b.data,
                                                    wanda::resolve_lambda(b.data, std::nullopt));
                    break;
            }
            const wanda::PruneMask mask =
                wanda::select_mask(scores, wanda::GroupingScheme::per_output(), orc_sparsity);
            double err_sum = 0.0;
            std::size_t matches = 0;
            for (std::size_t r = 0; r < orc_rows; ++r) {
                std::vector<std::size_t> pruned;
                for (std::size_t j = 0; j < orc_cin; ++j)
                    if (mask.at(r, j) == 0) pruned.push_back(j);
                err_sum += row_error(r, pruned);
                if (pruned == oracle_pruned[r]) ++matches;
            }
            methods[wanda::metric_name(metric)] = {
                {"mean_error", err_sum / static_cast<double>(orc_rows)},
                {"oracle_match_rate",
                 static_cast<double>(matches) / static_cast<double>(orc_rows)}};
        }

        const json out = {{"cin", orc_cin},
                          {"rows", orc_rows},
                          {"tokens", tokens},
                          {"sparsity", orc_sparsity},
                          {"prune_count", prune_count},
                          {"seed", orc_seed},
                          {"oracle", {{"mean_error", oracle_sum / static_cast<double>(orc_rows)}}},
                          {"methods", methods}};
        std::fputs((out.dump(2) + "\n").c_str(), stdout);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const wanda::SingularError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const wanda::NonFiniteError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const wanda::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const wanda::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const wanda::Error& e) {  // ArgError, ConfigError, ShapeError
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return rc;
}

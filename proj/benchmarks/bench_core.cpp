// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the scoring, selection, and update hot paths. Not part
// of the test suite; build and run `wanda_bench` directly.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "wanda/linalg.hpp"
#include "wanda/prune.hpp"
#include "wanda/synth.hpp"
#include "wanda/update.hpp"

namespace {

using wanda::CalibrationBatch;
using wanda::DenseMatrix;

struct Fixture {
    DenseMatrix w;
    CalibrationBatch x;
    std::vector<double> norms;
};

// One weight matrix plus a calibration batch per size, built once.
const Fixture& fixture(std::size_t n) {
    static std::vector<Fixture> cache;
    for (const Fixture& f : cache)
        if (f.w.rows == n) return f;
    Fixture f;
    f.w = wanda::gen_random_model({n, n}, 1).layers[0].weight;
    f.x = wanda::gen_outlier_batch(2 * n, n, 0.0625, 100.0, 2);
    f.norms = wanda::column_norms(f.x.data, wanda::NormKind::l2);
    cache.push_back(std::move(f));
    return cache.back();
}

void bm_score_magnitude(benchmark::State& state) {
    const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(wanda::score_magnitude(f.w));
}

void bm_score_wanda(benchmark::State& state) {
    const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        const auto norms = wanda::column_norms(f.x.data, wanda::NormKind::l2);
        benchmark::DoNotOptimize(wanda::score_wanda(f.w, norms));
    }
}

void bm_score_sparsegpt(benchmark::State& state) {
    const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(wanda::score_sparsegpt(f.w, f.x.data, 1e-2));
}

void bm_gram(benchmark::State& state) {
    const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(wanda::gram(f.x.data));
}

void bm_spd_inverse(benchmark::State& state) {
    const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    const wanda::Hessian h = wanda::build_hessian(f.x.data, 1e-2);
    for (auto _ : state) benchmark::DoNotOptimize(wanda::spd_inverse(h.h));
}

void bm_select_mask(benchmark::State& state) {
    const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    const wanda::ScoreMatrix s = wanda::score_wanda(f.w, f.norms);
    const wanda::GroupingScheme g = wanda::GroupingScheme::per_output();
    for (auto _ : state) benchmark::DoNotOptimize(wanda::select_mask(s, g, 0.5));
}

void bm_sequential_update(benchmark::State& state) {
    const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    const wanda::ScoreMatrix s = wanda::score_wanda(f.w, f.norms);
    const wanda::PruneMask mask =
        wanda::select_mask(s, wanda::GroupingScheme::per_output(), 0.5);
    const wanda::Hessian h = wanda::build_hessian(f.x.data, 1e-2);
    for (auto _ : state)
        benchmark::DoNotOptimize(wanda::sequential_update(f.w, mask, h));
}

}  // namespace

BENCHMARK(bm_score_magnitude)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_score_wanda)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_score_sparsegpt)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_gram)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_spd_inverse)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_select_mask)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_sequential_update)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

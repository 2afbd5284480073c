// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace wanda {

// Process-wide worker count for the data-parallel loops below. Every loop in
// this library partitions work so that each output element is produced by
// exactly one thread with a fixed inner summation order, so results are
// bit-identical for any thread count.
void set_num_threads(unsigned n);
unsigned num_threads();

// Calls fn(begin, end) on contiguous chunks of [0, n), possibly from worker
// threads. fn must only write state owned by its chunk. If chunks throw, the
// exception of the lowest chunk is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    unsigned k = num_threads();
    if (n == 0) return;
    if (k <= 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    k = static_cast<unsigned>(std::min<std::size_t>(k, n));
    const std::size_t chunk = (n + k - 1) / k;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    std::vector<std::exception_ptr> errors(nchunks);
    std::vector<std::thread> workers;
    workers.reserve(nchunks - 1);
    for (std::size_t c = 1; c < nchunks; ++c) {
        const std::size_t begin = c * chunk;
        const std::size_t end = std::min(begin + chunk, n);
        workers.emplace_back([&fn, &errors, c, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    try {
        fn(std::size_t{0}, std::min(chunk, n));
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace wanda

// SPDX-License-Identifier: Apache-2.0
#include "wanda/parallel.hpp"

#include <atomic>

namespace wanda {

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_num_threads(unsigned n) { g_threads.store(n == 0 ? 1 : n); }

unsigned num_threads() { return g_threads.load(); }

}  // namespace wanda

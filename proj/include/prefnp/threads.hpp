#pragma once
// Deterministic fork-join helper for read-only evaluation work. Each index
// writes into its own output slot, so results do not depend on scheduling.
// PREFNP_THREADS caps the worker count.

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace prefnp {

inline size_t worker_count(size_t jobs) {
    size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("PREFNP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) hw = std::min(hw, static_cast<size_t>(v));
    }
    return std::max<size_t>(1, std::min(hw, jobs));
}

template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
    const size_t workers = worker_count(n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace prefnp

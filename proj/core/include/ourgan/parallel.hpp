#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace ourgan {

/// Runs fn(i) for i in [0, n) across up to hardware_concurrency threads.
/// Workers receive disjoint index ranges, so writes to per-index slots are
/// race-free and results do not depend on scheduling. Nested calls run
/// sequentially instead of oversubscribing.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    if (n <= 0) return;
    static thread_local int depth = 0;
    unsigned hw = std::thread::hardware_concurrency();
    int64_t workers = std::min<int64_t>(n, hw == 0 ? 1 : hw);
    if (depth > 0 || workers <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    ++depth;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int64_t t = 0; t < workers; ++t) {
        int64_t lo = n * t / workers;
        int64_t hi = n * (t + 1) / workers;
        pool.emplace_back([lo, hi, &fn] {
            ++depth;
            for (int64_t i = lo; i < hi; ++i) fn(i);
            --depth;
        });
    }
    for (auto& th : pool) th.join();
    --depth;
}

}  // namespace ourgan

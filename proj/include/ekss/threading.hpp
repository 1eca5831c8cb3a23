#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ekss {

/// Worker count: EKSS_THREADS env var when set, else hardware concurrency.
inline int thread_count() {
    if (const char* env = std::getenv("EKSS_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs f(i) for i in [0, n). Each index must be independent work writing
/// only to its own slots; scheduling order is then irrelevant to the result.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const int workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                f(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

/// Splits [0, n) into contiguous ranges, one per worker, and runs
/// f(begin, end, worker_id). Intended for commutative reductions into
/// per-worker accumulators (e.g. integer counters).
template <class F>
void parallel_ranges(std::size_t n, int workers, F&& f) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (workers == 1) {
        f(std::size_t{0}, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = n / workers;
    const std::size_t rem = n % workers;
    std::size_t begin = 0;
    for (int w = 0; w < workers; ++w) {
        const std::size_t len = chunk + (static_cast<std::size_t>(w) < rem ? 1 : 0);
        pool.emplace_back([&f, begin, len, w] { f(begin, begin + len, w); });
        begin += len;
    }
    for (auto& t : pool) t.join();
}

}  // namespace ekss

#include "streamocc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace streamocc {

namespace {
std::atomic<int> g_threads{0}; // 0 = not set yet, use hardware_concurrency
}

void set_thread_count(int n) {
    g_threads.store(n < 1 ? 1 : n);
}

int thread_count() {
    int n = g_threads.load();
    if (n == 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
        g_threads.store(n);
    }
    return n;
}

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    const std::int64_t total = end - begin;
    if (total <= 0) return;

    const int nthreads = std::min<std::int64_t>(thread_count(), total);
    if (nthreads <= 1) {
        fn(begin, end);
        return;
    }

    const std::int64_t chunk = (total + nthreads - 1) / nthreads;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
        const std::int64_t lo = begin + t * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& w : workers) w.join();
}

} // namespace streamocc

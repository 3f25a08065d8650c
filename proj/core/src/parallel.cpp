#include "gsrec/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace gsrec {

namespace {
std::atomic<int> g_default_threads{1};
}

int default_thread_count() { return g_default_threads.load(); }

void set_default_thread_count(int n) {
    g_default_threads.store(std::max(1, n));
}

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  int threads) {
    if (end <= begin) return;
    const std::int64_t n = end - begin;
    int workers = threads > 0 ? threads : default_thread_count();
    workers = static_cast<int>(std::min<std::int64_t>(workers, n));
    if (workers <= 1) {
        fn(begin, end);
        return;
    }
    const std::int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = begin + w * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace gsrec

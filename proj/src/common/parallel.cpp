#include "kpl/parallel.hpp"

#include <atomic>

namespace kpl {

namespace {
std::atomic<int> g_jobs{0};
}

int worker_count() {
    int j = g_jobs.load();
    if (j <= 0) {
        j = static_cast<int>(std::thread::hardware_concurrency());
        if (j <= 0) j = 1;
    }
    return j;
}

void set_worker_count(int jobs) { g_jobs.store(jobs); }

void parallel_for(int n, const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    const int jobs = std::min(worker_count(), n);
    if (jobs <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    const int chunk = (n + jobs - 1) / jobs;
    for (int t = 0; t < jobs; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace kpl

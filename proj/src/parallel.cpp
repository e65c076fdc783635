#include "recalx/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "recalx/error.hpp"

namespace recalx {

namespace {
std::atomic<int> g_workers{1};
}

void set_worker_count(int workers) {
    require(workers >= 1, ErrorCode::invalid_argument, "worker count must be >= 1");
    g_workers.store(workers);
}

int worker_count() { return g_workers.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int workers = worker_count();
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace recalx

#include <atomic>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "recalx/error.hpp"
#include "recalx/parallel.hpp"

namespace {

struct WorkerGuard {
    int saved = recalx::worker_count();
    ~WorkerGuard() { recalx::set_worker_count(saved); }
};

}  // namespace

TEST_CASE("worker count is validated and readable") {
    WorkerGuard guard;
    recalx::set_worker_count(3);
    CHECK(recalx::worker_count() == 3);
    CHECK_THROWS_AS(recalx::set_worker_count(0), recalx::Error);
    CHECK_THROWS_AS(recalx::set_worker_count(-5), recalx::Error);
    CHECK(recalx::worker_count() == 3);  // rejected values leave it unchanged
}

TEST_CASE("parallel_for visits every index exactly once") {
    WorkerGuard guard;
    for (int workers : {1, 2, 4}) {
        recalx::set_worker_count(workers);
        const std::size_t n = 1000;
        std::vector<std::atomic<int>> hits(n);
        recalx::parallel_for(n, [&](std::size_t i) { hits[i].fetch_add(1); });
        for (std::size_t i = 0; i < n; ++i) {
            CAPTURE(workers);
            CAPTURE(i);
            CHECK(hits[i].load() == 1);
        }
    }
}

TEST_CASE("parallel_for with zero items is a no-op") {
    WorkerGuard guard;
    recalx::set_worker_count(4);
    bool called = false;
    recalx::parallel_for(0, [&](std::size_t) { called = true; });
    CHECK_FALSE(called);
}

TEST_CASE("per-index slots give identical results for any worker count") {
    WorkerGuard guard;
    const std::size_t n = 257;
    auto run = [&](int workers) {
        recalx::set_worker_count(workers);
        std::vector<double> out(n);
        recalx::parallel_for(n, [&](std::size_t i) {
            out[i] = static_cast<double>(i) * 1.5 + 0.25;
        });
        return out;
    };
    const std::vector<double> base = run(1);
    CHECK(run(2) == base);
    CHECK(run(8) == base);
}

TEST_CASE("exceptions thrown by a worker propagate to the caller") {
    WorkerGuard guard;
    for (int workers : {1, 3}) {
        recalx::set_worker_count(workers);
        CAPTURE(workers);
        CHECK_THROWS_AS(recalx::parallel_for(100,
                                             [&](std::size_t i) {
                                                 if (i == 57) throw std::runtime_error("boom");
                                             }),
                        std::runtime_error);
    }
}

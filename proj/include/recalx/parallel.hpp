#pragma once

#include <cstddef>
#include <functional>

namespace recalx {

// Process-wide worker count for the parallelizable inner loops (default 1).
// Every parallel loop writes results into per-index slots, so the worker
// count never changes output bytes.
void set_worker_count(int workers);
int worker_count();

// Runs fn(i) for i in [0, n). With worker_count() == 1 this is a plain loop;
// otherwise indices are chunked across threads. The first exception thrown
// by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace recalx

#pragma once

#include <cstddef>
#include <functional>

namespace ctcfuse {

// Worker count from $CTC_FUSE_JOBS, else the number of logical cores (at least 1).
unsigned default_jobs();

// Calls fn(i) for every i in [0, n) on up to `jobs` threads. Indices are
// handed out dynamically; callers write into pre-sized slots so results stay
// in index order. The first exception thrown by fn is rethrown after all
// workers have stopped.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)> &fn);

}  // namespace ctcfuse

#pragma once

#include <cstddef>
#include <functional>

namespace dlqr {

/// Worker count from TOOL_WORKERS when set to a positive integer, else the
/// hardware concurrency (at least 1).
unsigned default_workers();

/// Calls fn(i) for every i in [0, count) on up to `workers` threads. Each
/// index is visited exactly once; the first exception thrown by any call is
/// rethrown after all workers have joined.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace dlqr

#pragma once

#include <cstddef>
#include <functional>

namespace fblab {

/// Number of worker threads used by parallel_for (default: hardware concurrency).
int worker_count();
void set_worker_count(int workers);

/// Calls fn(i) for i in [0, n) on worker_count() threads using a static
/// contiguous partition. Callers write results to slot i and reduce in index
/// order afterwards, so results never depend on the worker count. The first
/// exception (lowest chunk) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fblab

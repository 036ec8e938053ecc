#pragma once

#include <cstddef>
#include <functional>

namespace sobolev {

/// Worker count: `requested` when positive, else SOBOLEV_PROXY_THREADS when
/// set to a positive integer, else the hardware concurrency (at least 1).
int resolve_threads(int requested = 0);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Indices are
/// handed out in order; the first exception thrown by any body is rethrown
/// after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace sobolev

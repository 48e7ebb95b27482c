#pragma once

#include <cstddef>
#include <functional>

namespace lineage {

/// Worker count from FINGERPRINT_THREADS (0 or unset = hardware concurrency).
std::size_t default_thread_count();

/// Runs body(i) for i in [0, n) over up to `threads` workers (0 = default).
/// Each index runs exactly once; callers write results into per-index slots so
/// output never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace lineage

#pragma once

#include <cstddef>
#include <functional>

namespace hydroscale {

/// Worker count used when jobs == 0.
unsigned default_jobs();

/// Calls fn(i) for i in [0, n) on up to `jobs` threads (0 = default_jobs()).
/// Results must be written to per-index slots; the first exception thrown
/// by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace hydroscale

#pragma once

#include <cstddef>
#include <functional>

namespace av {

// Worker count: min(hardware, AVROBUST_THREADS). Read once per process.
size_t max_threads();

// Runs fn(i) for i in [0, n) on up to max_threads() workers, contiguous
// blocks per worker. fn must be safe to call concurrently for distinct i;
// callers that need a reduction should write into per-index slots and fold
// them afterwards in index order so results do not depend on thread count.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace av

#pragma once

#include <cstddef>
#include <functional>

namespace shapetest {

// Worker count: SHAPETEST_THREADS if set and positive, else hardware concurrency.
int worker_count();

// Calls body(i) for i in [0, count). Work is handed out through an atomic counter, so
// results must be written to per-index slots. The first exception thrown is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, int max_workers = 0);

}  // namespace shapetest

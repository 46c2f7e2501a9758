#pragma once

#include <cstddef>
#include <functional>

namespace phong_splat {

// Worker count from PHONG_SPLAT_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

// Runs fn(0..n-1) across workers. Results must not depend on scheduling;
// callers write disjoint outputs. Nested calls run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace phong_splat

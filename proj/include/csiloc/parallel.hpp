#pragma once

#include <cstddef>
#include <functional>

namespace csiloc {

/// Worker count from CSILOC_THREADS (default: hardware concurrency, at least 1).
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on static contiguous chunks. Each index is visited
/// exactly once, so results written to per-index slots are order independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace csiloc

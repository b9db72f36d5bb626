#pragma once

#include <cstddef>
#include <functional>

namespace vcg {

/// Worker count: VCG_THREADS if set and positive, otherwise hardware concurrency.
std::size_t thread_budget();

/// Runs fn(i) for i in [0, n) over at most thread_budget() threads.
/// Each index runs exactly once; callers that need deterministic output
/// write into per-index slots and reduce afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace vcg

#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace cmfg {

// Runs body(i) for every i in [0, n) on up to `threads` workers. Callers
// write results by index, so output never depends on scheduling. When bodies
// throw, the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// Explicit request wins, then CARLEMAN_MFG_THREADS, then 1.
int resolve_threads(std::optional<int> requested);

}  // namespace cmfg

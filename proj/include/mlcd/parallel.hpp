#ifndef MLCD_PARALLEL_HPP
#define MLCD_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace mlcd {

/// Worker cap for parallel loops. Defaults to MLCD_THREADS if set, else the
/// hardware concurrency.
std::size_t num_threads();
void set_num_threads(std::size_t n);

/// Runs fn(i) for every i in [0, n). Each index is visited exactly once and
/// callers only write to per-index slots, so results never depend on the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mlcd

#endif  // MLCD_PARALLEL_HPP

#pragma once

#include <cstddef>
#include <functional>

namespace sgdnet {

// Worker cap from UNFOLD_SGD_THREADS (default 1; invalid values give 1).
std::size_t env_worker_count();

/// Runs fn(0..n-1) on up to `workers` threads. Each index runs exactly once;
/// the first exception thrown is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace sgdnet

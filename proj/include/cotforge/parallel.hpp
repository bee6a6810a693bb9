#pragma once

#include <cstddef>
#include <functional>

namespace cotforge {

/// Runs `fn(i)` for every i in [0, n) on up to `max_parallel` threads. The
/// first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, int max_parallel, const std::function<void(std::size_t)>& fn);

}  // namespace cotforge

#pragma once

#include <cstdint>
#include <functional>

namespace marketdyn {

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks, one per
/// worker; every item writes only its own output slot, so results are
/// independent of the worker count. n_threads <= 0 selects the hardware count.
void parallel_for(std::int64_t n, int n_threads, const std::function<void(std::int64_t)>& fn);

}  // namespace marketdyn

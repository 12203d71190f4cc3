#pragma once

#include <cstddef>
#include <functional>

namespace calib {

/// Global worker-pool width used by parallel_for when threads <= 0.
/// The CLI sets this from --threads; defaults to hardware concurrency.
void set_default_threads(int n);
int default_threads();

/// Runs fn(i) for i in [0, count) on a static block partition.
/// Callers must write to disjoint slots; reductions happen after the join,
/// so results are identical for any thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  int threads = 0);

}  // namespace calib

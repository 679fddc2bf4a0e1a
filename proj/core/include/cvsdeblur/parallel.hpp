#pragma once

#include <cstdint>
#include <functional>

namespace cvsdeblur {

// Worker count used by parallel_for. 0 restores the hardware default.
void set_num_threads(int n);
int num_threads();

// Runs fn(begin, end) over a partition of [0, n) into one contiguous chunk
// per worker. Chunk ownership depends only on n and the worker count, so
// results are deterministic for any op whose chunks touch disjoint outputs.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace cvsdeblur

#pragma once

#include <cstdint>
#include <functional>

namespace streamocc {

// Data-parallel helper used by the dense kernels. Work is split into
// contiguous index ranges; every output element is owned by exactly one
// range, so results are bit-identical for any thread count.

void set_thread_count(int n);
int thread_count();

/// Calls fn(begin, end) on disjoint chunks covering [begin, end).
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

} // namespace streamocc

#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace kpl {

// Process-wide worker count used by row-parallel image operations.
// 0 means "use hardware concurrency". Every parallelized operation in the
// library writes disjoint output ranges, so results are identical for any
// worker count.
int worker_count();
void set_worker_count(int jobs);

// Runs fn(begin, end) over [0, n) split into contiguous blocks.
void parallel_for(int n, const std::function<void(int, int)>& fn);

}  // namespace kpl

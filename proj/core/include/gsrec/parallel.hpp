#pragma once

#include <cstdint>
#include <functional>

namespace gsrec {

// Process-wide default worker count used when a config passes threads == 0.
int default_thread_count();
void set_default_thread_count(int n);

// Runs fn(chunk_begin, chunk_end) over a static partition of [begin, end).
// Chunks are contiguous and disjoint; callers must only write to disjoint
// outputs so results do not depend on the worker count.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  int threads = 0);

}  // namespace gsrec

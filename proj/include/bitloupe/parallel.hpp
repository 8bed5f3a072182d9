#pragma once

#include <cstddef>
#include <functional>

namespace bitloupe {

// Runs fn(i) for i in [0, count) across up to max_threads workers (0 means
// hardware concurrency). Each index is claimed exactly once; callers write
// results into preassigned slots, so scheduling never affects output bytes.
// Nested calls run inline on the calling thread to avoid oversubscription.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  unsigned max_threads = 0);

}  // namespace bitloupe

#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace bs {

// Process-wide worker cap. 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(chunk_index) for chunk_index in [0, n_chunks). Chunk indices are
// handed out dynamically; results that must be order-sensitive should be
// written into per-chunk slots and reduced by the caller in chunk order so
// output does not depend on scheduling or worker count.
void parallel_chunks(int n_chunks, const std::function<void(int)>& fn);

}  // namespace bs

#include "core/parallel.hpp"

namespace bs {

namespace {
std::atomic<int> g_thread_cap{1};
}

void set_thread_count(int n) {
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    g_thread_cap.store(std::max(1, n));
}

int thread_count() { return g_thread_cap.load(); }

void parallel_chunks(int n_chunks, const std::function<void(int)>& fn) {
    const int workers = std::min(thread_count(), n_chunks);
    if (workers <= 1) {
        for (int i = 0; i < n_chunks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_chunks; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace bs

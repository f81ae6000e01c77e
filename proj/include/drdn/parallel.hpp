#pragma once

// Deterministic fork-join helper. Work items write disjoint outputs, so the
// result is independent of the thread count; DRDN_THREADS caps it (0 = auto).

#include <cstdlib>
#include <thread>
#include <vector>

namespace drdn {

inline int thread_limit() {
    static const int limit = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("DRDN_THREADS")) {
            const int requested = std::atoi(env);
            if (requested > 0) return requested < hw ? requested : hw;
        }
        return hw;
    }();
    return limit;
}

// Calls body(i) for i in [0, count); items must be independent.
template <typename Body>
void parallel_for(long count, const Body& body) {
    const int threads = thread_limit();
    if (threads <= 1 || count <= 1) {
        for (long i = 0; i < count; ++i) body(i);
        return;
    }
    const int workers = static_cast<int>(threads < count ? threads : count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([=, &body] {
            for (long i = t; i < count; i += workers) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace drdn

#pragma once

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace smilenet {

// Worker cap from SMILENET_THREADS; 0 or unset means sequential.
inline int configured_threads() {
    const char* env = std::getenv("SMILENET_THREADS");
    if (!env || !*env) return 0;
    return std::atoi(env);
}

// Runs fn(0..n-1). With threads > 1 the indices are striped across workers;
// each index writes only its own result slot, so the outcome is identical to
// the sequential schedule.
inline void for_each_index(std::size_t n, int threads,
                           const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace smilenet

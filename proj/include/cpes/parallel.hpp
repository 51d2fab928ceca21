// Minimal fixed-chunk parallel map. Thread count is capped by the
// CPES_QSM_THREADS environment variable (default: hardware concurrency).
#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace cpes {

inline int thread_budget() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("CPES_QSM_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap >= 1) hw = std::min(hw, cap);
        } catch (...) {
        }
    }
    return hw;
}

/// Applies fn(i) for i in [0, count) across worker threads; results land in a
/// pre-sized vector so the output order is deterministic.
template <typename T>
std::vector<T> parallel_map(int count, const std::function<T(int)>& fn) {
    std::vector<T> out(static_cast<size_t>(std::max(count, 0)));
    const int workers = std::min(thread_budget(), std::max(count, 1));
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                out[i] = fn(i);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace cpes

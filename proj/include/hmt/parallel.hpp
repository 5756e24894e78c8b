#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace hmt {

// Runs fn(i) for i in [0, n) over `threads` workers with a static strided
// schedule. Callers must make each fn(i) independent of the others; results
// then do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
}

}  // namespace hmt

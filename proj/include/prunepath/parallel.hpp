// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace prunepath {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items are claimed
/// dynamically; each must write only to its own output slot. The first
/// exception thrown by any item is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    if (n == 0) return;
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (unsigned t = 0; t < workers; ++t) threads.emplace_back(body);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace prunepath

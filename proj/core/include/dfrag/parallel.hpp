#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dfrag {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Indices are handed
/// out in increasing order. The first exception thrown by any call is
/// rethrown after all threads join; remaining indices are skipped.
template <typename Fn>
void parallelFor(std::size_t n, std::size_t workers, Fn&& fn) {
    if (n == 0) {
        return;
    }
    const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex errorMutex;

    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(errorMutex);
                if (!error) {
                    error = std::current_exception();
                }
                failed.store(true);
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace dfrag

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gazelab::detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots so output order never depends on scheduling.
/// The first exception thrown is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1u, jobs));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(workers, n); ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace gazelab::detail

#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace nodeflow {

/// Thread count from NODEFLOW_THREADS, or 1 when unset or invalid.
inline int default_thread_count()
{
    if (const char* env = std::getenv("NODEFLOW_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
        }
    }
    return 1;
}

/// Runs body(i) for i in [0, n) on up to `threads` threads, using a static
/// block partition. Each index must only write its own output slot; results
/// are then independent of the thread count. The first exception thrown by
/// any block is rethrown on the calling thread.
inline void parallel_for(long n, int threads, const std::function<void(long)>& body)
{
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<long>(n, 1))));
    if (threads == 1) {
        for (long i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            const long begin = n * t / threads;
            const long end = n * (t + 1) / threads;
            try {
                for (long i = begin; i < end; ++i) {
                    body(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace nodeflow

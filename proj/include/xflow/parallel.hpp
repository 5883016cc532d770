#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace xflow {

/// Number of workers to use when the caller passes 0.
inline unsigned default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs body(worker, begin, end) over [0, count) in chunks handed out
/// dynamically to `workers` threads. Callers must write results by index so
/// the output does not depend on the schedule.
template <typename Body>
void parallel_chunks(std::size_t count, unsigned workers, std::size_t chunk, Body&& body) {
    if (workers == 0) workers = default_workers();
    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t chunks = (count + chunk - 1) / chunk;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(chunks, 1)));

    if (workers <= 1) {
        for (std::size_t begin = 0; begin < count; begin += chunk)
            body(0u, begin, std::min(count, begin + chunk));
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&](unsigned worker) {
        try {
            for (;;) {
                const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
                if (c >= chunks) break;
                const std::size_t begin = c * chunk;
                body(worker, begin, std::min(count, begin + chunk));
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(chunks);
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace xflow

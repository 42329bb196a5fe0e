#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace sgld {

inline unsigned resolve_threads(unsigned requested, std::size_t n_jobs) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(n_jobs, 1)));
}

/// Calls job(i) for i in [0, n_jobs) on up to `threads` workers (0 = hardware
/// concurrency). Jobs must write only to their own slots. The first exception
/// thrown by a worker is rethrown here after all workers stop.
template <class Job>
void parallel_for(std::size_t n_jobs, unsigned threads, Job&& job) {
    const unsigned n_threads = resolve_threads(threads, n_jobs);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n_jobs; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n_threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = next++; i < n_jobs; i = next++) job(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                    next = n_jobs;
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace sgld

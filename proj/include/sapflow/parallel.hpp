#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace sapflow {

/// Controls data parallelism of per-vertex and per-face loops.
///
/// Element-wise loops write disjoint slots and give identical results for any
/// thread count. Reductions are only split across threads when
/// `deterministic` is false; otherwise they run in index order.
struct Execution
{
    unsigned threads = 1;
    bool deterministic = true;

    bool operator==(const Execution&) const = default;

    /// Reads SAPFLOW_THREADS and SAPFLOW_DETERMINISTIC.
    static Execution from_environment()
    {
        Execution exec;
        if (const char* t = std::getenv("SAPFLOW_THREADS")) {
            try {
                const long n = std::stol(t);
                if (n > 0) exec.threads = static_cast<unsigned>(n);
            } catch (...) {
            }
        }
        if (const char* d = std::getenv("SAPFLOW_DETERMINISTIC")) {
            exec.deterministic = std::string(d) == "1";
        }
        return exec;
    }
};

/// Calls `fn(i)` for i in [0, n), splitting the range into contiguous chunks.
template <typename Fn>
void parallel_for(std::size_t n, const Execution& exec, Fn&& fn)
{
    const unsigned threads = std::max(1u, exec.threads);
    if (threads == 1 || n < 256) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Sum of `term(i)` for i in [0, n).
template <typename Fn>
double parallel_sum(std::size_t n, const Execution& exec, Fn&& term)
{
    if (exec.deterministic || exec.threads <= 1 || n < 256) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += term(i);
        return s;
    }
    const unsigned threads = exec.threads;
    std::vector<double> partial(threads, 0.0);
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, t, &partial, &term] {
            double s = 0.0;
            for (std::size_t i = begin; i < end; ++i) s += term(i);
            partial[t] = s;
        });
    }
    for (auto& th : pool) th.join();
    double s = 0.0;
    for (double p : partial) s += p;
    return s;
}

} // namespace sapflow

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace arnqs {

/// Hardware concurrency, at least 1.
inline std::size_t default_workers() noexcept
{
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls body(i) for i in [0, n) on up to `workers` threads. Tasks are
/// handed out by an atomic counter; the first exception is rethrown after
/// all threads join. Bodies must write only to slots they own.
template <class Body>
void parallel_for(std::size_t n, std::size_t workers, Body&& body)
{
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
            try {
                body(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Index-ordered results of fn(i), independent of scheduling.
template <class Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn&& fn)
{
    using T = decltype(fn(std::size_t{}));
    std::vector<T> out(n);
    parallel_for(n, workers, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

} // namespace arnqs

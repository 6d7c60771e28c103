// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pot::detail
{

/// Calls fn(i) for every i in [0, count) on at most `parallelism` threads. Work is
/// handed out in index order; callers must not depend on completion order. The first
/// exception escaping fn is rethrown after all workers have joined.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t parallelism, Fn&& fn)
{
    auto const workers = std::min(std::max<std::size_t>(parallelism, 1), count);
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }

    auto next = std::atomic<std::size_t> {0};
    auto failure = std::exception_ptr {};
    auto failureMutex = std::mutex {};
    auto work = [&] {
        for (auto i = next++; i < count; i = next++)
        {
            try
            {
                fn(i);
            }
            catch (...)
            {
                auto const lock = std::lock_guard(failureMutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };

    auto threads = std::vector<std::thread> {};
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        threads.emplace_back(work);
    for (auto& t: threads)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace pot::detail

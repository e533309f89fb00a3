#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace dgms {

/// Runs fn(worker, i) for i in [0, n) on up to `threads` workers. If any call
/// throws, the exception of the smallest failing index is rethrown, so the
/// reported failure does not depend on scheduling.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn)
{
    const int workers = std::max(1, std::min(threads, n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(n, 0)));
    std::atomic<int>                next{0};
    std::atomic<bool>               failed{false};

    auto work = [&](int worker) {
        for (int i = next++; i < n; i = next++)
        {
            if (failed)
                break;
            try
            {
                fn(worker, i);
            }
            catch (...)
            {
                errors[i] = std::current_exception();
                failed = true;
            }
        }
    };

    if (workers == 1)
        work(0);
    else
    {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(work, w);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace dgms

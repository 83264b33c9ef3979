// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The pilotmae authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace pilotmae::tc {

/// Runs fn(i) for i in [0, n) on up to `threads` workers with a static block
/// partition. Callers write results into per-index slots, so output does not
/// depend on scheduling.
template <typename Fn>
void parallel_for(int n, int threads, Fn &&fn)
{
    threads = std::clamp(threads, 1, std::max(1, n));
    if (threads == 1)
    {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    const int chunk = (n + threads - 1) / threads;
    for (int w = 0; w < threads; ++w)
    {
        pool.emplace_back([&, w] {
            try
            {
                const int lo = w * chunk;
                const int hi = std::min(n, lo + chunk);
                for (int i = lo; i < hi; ++i)
                    fn(i);
            }
            catch (...)
            {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto &t : pool)
        t.join();
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

inline int hardware_threads()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace pilotmae::tc

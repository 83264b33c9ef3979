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

#include "pilotmae/tensorcore/graph.hpp"
#include "pilotmae/tensorcore/parallel.hpp"

#include <unordered_map>

namespace pilotmae::pre {

/// Runs one mini-batch of per-sample graphs and leaves the mean gradient in
/// Parameter::grad. Each worker owns a contiguous slice of the batch and a
/// private gradient buffer; buffers are summed in worker order, so results
/// are reproducible for a fixed thread count.
template <typename T>
class BatchRunner
{
public:
    BatchRunner(std::vector<tc::Parameter<T> *> params, int threads) : params_(std::move(params)), threads_(threads)
    {
        for (std::size_t i = 0; i < params_.size(); ++i)
            index_[params_[i]] = i;
    }

    /// fn(Graph&, i) builds sample i's scalar loss.
    template <typename Fn>
    void run(int n, Fn &&fn)
    {
        for (auto *p : params_)
            p->zero_grad();
        const T seed = T(1) / static_cast<T>(n);
        const int workers = std::clamp(threads_, 1, std::max(1, n));
        if (workers == 1)
        {
            for (int i = 0; i < n; ++i)
            {
                tc::Graph<T> g;
                g.backward(fn(g, i), seed);
                g.flush_param_grads();
            }
            return;
        }
        std::vector<std::vector<tc::Tensor<T>>> buffers(static_cast<std::size_t>(workers));
        const int chunk = (n + workers - 1) / workers;
        tc::parallel_for(workers, workers, [&](int w) {
            auto &buf = buffers[static_cast<std::size_t>(w)];
            buf.resize(params_.size());
            for (int i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i)
            {
                tc::Graph<T> g;
                g.backward(fn(g, i), seed);
                g.for_each_param_grad([&](tc::Parameter<T> &p, const tc::Tensor<T> &grad) {
                    auto &dst = buf[index_.at(&p)];
                    if (dst.empty())
                        dst = tc::Tensor<T>(grad.shape(), T(0));
                    dst.mat() += grad.mat();
                });
            }
        });
        for (auto &buf : buffers)
            for (std::size_t k = 0; k < params_.size(); ++k)
                if (!buf[k].empty())
                    params_[k]->grad.mat() += buf[k].mat();
    }

    const std::vector<tc::Parameter<T> *> &params() const { return params_; }

private:
    std::vector<tc::Parameter<T> *> params_;
    std::unordered_map<const tc::Parameter<T> *, std::size_t> index_;
    int threads_;
};

} // namespace pilotmae::pre

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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace pilotmae::tc {

struct GradCheckResult
{
    /// Max over parameter tensors of ||a - fd|| / max(||a||, ||fd||, 1e-12).
    double max_rel_error = 0.0;
    std::string worst_param;
    /// Largest absolute elementwise deviation, for diagnostics.
    double max_abs_error = 0.0;
    std::size_t checked = 0;
};

/// Compares reverse-mode gradients of a scalar loss against fourth-order
/// central differences (f(-2h), f(-h), f(h), f(2h)). Second-order differences
/// at small h are dominated by round-off on tensors with tiny gradients.
/// `loss` rebuilds the graph from the current parameter values on every call.
inline GradCheckResult grad_check(const std::function<Var<double>(Graph<double> &)> &loss,
                                  const std::vector<Parameter<double> *> &params, double h = 1e-3)
{
    auto evaluate = [&]() {
        Graph<double> g(false);
        const double v = loss(g).value()[0];
        if (!std::isfinite(v))
            throw NonFiniteError("grad_check: non-finite loss");
        return v;
    };

    for (auto *p : params)
        p->zero_grad();
    {
        Graph<double> g(true);
        Var<double> l = loss(g);
        g.backward(l);
        g.flush_param_grads();
    }

    GradCheckResult res;
    for (auto *p : params)
    {
        if (!p->trainable)
            continue;
        double diff_sq = 0, a_sq = 0, fd_sq = 0;
        auto vals = p->value.values();
        for (std::size_t i = 0; i < vals.size(); ++i)
        {
            const double orig = vals[i];
            auto at = [&](double step) {
                vals[i] = orig + step;
                return evaluate();
            };
            const double d1 = at(h) - at(-h);
            const double d2 = at(2 * h) - at(-2 * h);
            const double fd = (8 * d1 - d2) / (12 * h);
            vals[i] = orig;
            const double a = p->grad[i];
            diff_sq += (a - fd) * (a - fd);
            a_sq += a * a;
            fd_sq += fd * fd;
            res.max_abs_error = std::max(res.max_abs_error, std::abs(a - fd));
            ++res.checked;
        }
        const double rel = std::sqrt(diff_sq) / std::max({std::sqrt(a_sq), std::sqrt(fd_sq), 1e-12});
        if (rel >= res.max_rel_error)
        {
            res.max_rel_error = rel;
            res.worst_param = p->name;
        }
    }
    return res;
}

} // namespace pilotmae::tc

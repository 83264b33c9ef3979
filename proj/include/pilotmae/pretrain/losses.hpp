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

#include "pilotmae/tensorcore/ops.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pilotmae::pre {

using tc::Graph;
using tc::Tensor;
using tc::Var;

struct LossWeights
{
    double lambda_enc = 0.05;
    double lambda_dec = 0.05;
};

/// Mean over masked patches of the squared L2 distance to the normalized target.
template <typename T>
Var<T> recon_loss(Var<T> pred, const Tensor<T> &target)
{
    return tc::row_sq_error_mean(pred, target);
}

/// Mean over an index set of the squared L2 error of (mean, log-variance) predictions.
template <typename T>
Var<T> scale_loss(Var<T> pred, const Tensor<T> &target)
{
    return tc::row_sq_error_mean(pred, target);
}

inline double total_loss(double recon, double scale_enc, double scale_dec, const LossWeights &w)
{
    return recon + w.lambda_enc * scale_enc + w.lambda_dec * scale_dec;
}

/// SNR lower-bound schedule: s_0/2 (1 + cos(pi e / (E-1))), annealing s_0 -> 0 dB.
struct Curriculum
{
    double s0 = 40.0;
    double s_max = 40.0;
    int epochs = 500;

    double lower_bound(int e) const
    {
        if (epochs < 1 || e < 0 || e > epochs - 1)
            throw std::out_of_range("curriculum: epoch " + std::to_string(e) + " outside schedule");
        if (epochs == 1)
            return s0;
        return 0.5 * s0 * (1.0 + std::cos(std::numbers::pi * e / (epochs - 1)));
    }

    /// Uniform draw on [s_min(e), s_max].
    double sample(int e, std::mt19937_64 &rng) const
    {
        const double lo = lower_bound(e);
        if (lo > s_max)
            throw std::invalid_argument("curriculum: s_min exceeds s_max");
        if (lo == s_max)
            return s_max;
        std::uniform_real_distribution<double> u(lo, s_max);
        return u(rng);
    }
};

} // namespace pilotmae::pre

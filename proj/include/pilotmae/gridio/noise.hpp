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

#include "pilotmae/gridio/mask.hpp"

#include <limits>

namespace pilotmae::grid {

/// Mean |h|^2 over the complex elements of a real-imag patch block.
template <typename T>
double complex_power(const tc::Tensor<T> &patches)
{
    double acc = 0;
    for (T v : patches.values())
        acc += static_cast<double>(v) * static_cast<double>(v);
    return acc / (static_cast<double>(patches.size()) / 2.0);
}

/// Adds circular complex Gaussian noise of variance P_b / 10^(snr/10), i.e.
/// variance sigma^2/2 per real scalar. snr_db = +inf leaves input untouched.
template <typename T>
void inject_awgn(tc::Tensor<T> &visible, double P_b, double snr_db, std::mt19937_64 &rng)
{
    if (std::isinf(snr_db) && snr_db > 0)
        return;
    if (!std::isfinite(snr_db))
        throw std::invalid_argument("inject_awgn: SNR must be finite or +inf");
    if (!(P_b > 0))
        throw std::invalid_argument("inject_awgn: zero signal power on kept patches");
    const double sigma2 = P_b / std::pow(10.0, snr_db / 10.0);
    std::normal_distribution<double> nd(0.0, std::sqrt(sigma2 / 2.0));
    for (T &v : visible.values())
        v = static_cast<T>(v + nd(rng));
}

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

} // namespace pilotmae::grid

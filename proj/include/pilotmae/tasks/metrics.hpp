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

#include "pilotmae/channelgen/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pilotmae::tasks {

inline constexpr double kNmseFloorDb = -100.0;

/// Linear ||Hhat - H||^2 / ||H||^2 for one grid.
inline double nmse_linear(const std::vector<chan::cfloat> &Hhat, const std::vector<chan::cfloat> &H)
{
    if (Hhat.size() != H.size())
        throw std::invalid_argument("nmse: shape mismatch");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < H.size(); ++i)
    {
        num += std::norm(chan::cdouble(Hhat[i]) - chan::cdouble(H[i]));
        den += std::norm(chan::cdouble(H[i]));
    }
    if (!(den > 0))
        throw std::invalid_argument("nmse: reference channel has zero energy");
    return num / den;
}

inline double to_db_floored(double linear)
{
    if (!(linear > 0))
        return kNmseFloorDb;
    return std::max(kNmseFloorDb, 10.0 * std::log10(linear));
}

/// Mean of per-sample linear NMSE, mapped to dB (floor -100 dB).
inline double nmse_db(const std::vector<double> &per_sample_linear)
{
    if (per_sample_linear.empty())
        throw std::invalid_argument("nmse: no samples");
    double acc = 0;
    for (double v : per_sample_linear)
        acc += v;
    return to_db_floored(acc / static_cast<double>(per_sample_linear.size()));
}

inline double nmse_db(const std::vector<chan::cfloat> &Hhat, const std::vector<chan::cfloat> &H)
{
    return to_db_floored(nmse_linear(Hhat, H));
}

struct MeanStd
{
    double mean = 0, std = 0;
    int n = 0;
};

/// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
inline MeanStd mean_std(const std::vector<double> &v)
{
    MeanStd r;
    r.n = static_cast<int>(v.size());
    if (v.empty())
        return r;
    for (double x : v)
        r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (v.size() > 1)
    {
        double ss = 0;
        for (double x : v)
            ss += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return r;
}

} // namespace pilotmae::tasks

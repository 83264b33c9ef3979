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

#include <Eigen/Dense>

namespace pilotmae::chan {

using CMat = Eigen::MatrixXcd;

/// Hermitian Toeplitz correlation R[i,j] = rho^|i-j| * exp(j*theta*(i-j)).
inline CMat exponential_correlation(int n, double rho, double theta = 0.0)
{
    CMat R(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            R(i, j) = std::pow(rho, std::abs(i - j)) * std::polar(1.0, theta * (i - j));
    return R;
}

/// Draws channels whose per-antenna time-frequency slice has covariance
/// R_f (x) R_t: H_s = L_t W L_f^T with W i.i.d. CN(0,1) and L L^H = R.
/// Each antenna is an independent draw.
inline std::vector<ChannelSample> kronecker_gaussian_channels(int T, int S, int F, const CMat &R_t, const CMat &R_f,
                                                              std::size_t count, std::uint64_t seed)
{
    if (R_t.rows() != T || R_f.rows() != F)
        throw std::invalid_argument("kronecker_gaussian_channels: covariance size mismatch");
    auto root = [](const CMat &R) {
        Eigen::SelfAdjointEigenSolver<CMat> es(R);
        const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return CMat(es.eigenvectors() * ev.asDiagonal());
    };
    const CMat Lt = root(R_t), Lf = root(R_f);
    std::vector<ChannelSample> out(count);
    for (std::size_t n = 0; n < count; ++n)
    {
        auto rng = stream_rng(seed, n, 0x6761);
        std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
        ChannelSample &c = out[n];
        c.id = n;
        c.T = T;
        c.S = S;
        c.F = F;
        c.H.resize(static_cast<std::size_t>(T) * S * F);
        CMat W(T, F);
        for (int s = 0; s < S; ++s)
        {
            for (int t = 0; t < T; ++t)
                for (int f = 0; f < F; ++f)
                    W(t, f) = cdouble(nd(rng), nd(rng));
            const CMat Hs = Lt * W * Lf.transpose();
            for (int t = 0; t < T; ++t)
                for (int f = 0; f < F; ++f)
                    c.at(t, s, f) = cfloat(static_cast<float>(Hs(t, f).real()), static_cast<float>(Hs(t, f).imag()));
        }
    }
    return out;
}

} // namespace pilotmae::chan

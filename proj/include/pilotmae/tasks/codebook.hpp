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

#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace pilotmae::tasks {

using chan::cdouble;

/// Sampling of one array axis: K = O*N (oversampled) or K = N/U (undersampled).
struct AxisSampling
{
    enum class Branch
    {
        oversampled,
        undersampled
    };
    Branch branch = Branch::oversampled;
    int factor = 1;

    static AxisSampling over(int o) { return {Branch::oversampled, o}; }
    static AxisSampling under(int u) { return {Branch::undersampled, u}; }

    int bins(int N, const char *axis) const
    {
        if (factor < 1)
            throw std::invalid_argument(std::string("codebook: ") + axis + " factor must be >= 1");
        if (branch == Branch::oversampled)
            return factor * N;
        if (N % factor != 0)
            throw std::invalid_argument(std::string("codebook: ") + axis + " undersampling factor " + std::to_string(factor) +
                                        " does not divide " + std::to_string(N));
        return N / factor;
    }
};

/// DFT codebook on an N_h x N_v planar array. Column m = m_v * K_h + m_h holds
/// a_v(m_v) kron a_h(m_h), with antenna index s = n_v * N_h + n_h.
struct Codebook
{
    int N_h = 8, N_v = 4;
    int K_h = 0, K_v = 0;
    Eigen::MatrixXcd W; ///< (N_h N_v) x M

    int M() const { return K_h * K_v; }
    int flat(int m_h, int m_v) const { return m_v * K_h + m_h; }
    std::pair<int, int> split(int m) const { return {m % K_h, m / K_h}; }
};

inline Eigen::VectorXcd dft_steering(int N, int K, int m)
{
    Eigen::VectorXcd a(N);
    const double phi = 2.0 * std::numbers::pi * m / K;
    for (int n = 0; n < N; ++n)
        a(n) = std::polar(1.0 / std::sqrt(static_cast<double>(N)), n * phi);
    return a;
}

inline Codebook build_codebook(int N_h, int N_v, AxisSampling h, AxisSampling v)
{
    if (N_h < 1 || N_v < 1)
        throw std::invalid_argument("codebook: array dimensions must be positive");
    Codebook cb;
    cb.N_h = N_h;
    cb.N_v = N_v;
    cb.K_h = h.bins(N_h, "horizontal");
    cb.K_v = v.bins(N_v, "vertical");
    cb.W.resize(N_h * N_v, cb.M());
    for (int mv = 0; mv < cb.K_v; ++mv)
    {
        const Eigen::VectorXcd av = dft_steering(N_v, cb.K_v, mv);
        for (int mh = 0; mh < cb.K_h; ++mh)
        {
            const Eigen::VectorXcd ah = dft_steering(N_h, cb.K_h, mh);
            auto col = cb.W.col(cb.flat(mh, mv));
            for (int nv = 0; nv < N_v; ++nv)
                col.segment(nv * N_h, N_h) = av(nv) * ah;
        }
    }
    return cb;
}

/// Average beam gain (1/(T F)) sum_{t,f} |w_m^H h_{t,f}|^2 for every codeword.
inline Eigen::VectorXd beam_gains(const std::vector<chan::cfloat> &H, int T, int S, int F, const Codebook &cb)
{
    if (S != cb.N_h * cb.N_v)
        throw std::invalid_argument("beam_gains: channel has " + std::to_string(S) + " antennas, codebook expects " +
                                    std::to_string(cb.N_h * cb.N_v));
    if (H.size() != static_cast<std::size_t>(T) * S * F)
        throw std::invalid_argument("beam_gains: grid size mismatch");
    // Columns are h_{t,f}.
    Eigen::MatrixXcd Hc(S, T * F);
    for (int t = 0; t < T; ++t)
        for (int s = 0; s < S; ++s)
            for (int f = 0; f < F; ++f)
                Hc(s, t * F + f) = cdouble(H[(static_cast<std::size_t>(t) * S + s) * F + f]);
    const Eigen::MatrixXcd G = cb.W.adjoint() * Hc;
    return G.cwiseAbs2().rowwise().sum() / static_cast<double>(T * F);
}

/// Codeword with the highest average gain; ties resolve to the smaller index.
inline int beam_label(const std::vector<chan::cfloat> &H, int T, int S, int F, const Codebook &cb)
{
    const Eigen::VectorXd g = beam_gains(H, T, S, F, cb);
    int best = 0;
    for (int m = 1; m < g.size(); ++m)
        if (g(m) > g(best))
            best = m;
    return best;
}

inline int beam_label(const chan::ChannelSample &s, const Codebook &cb) { return beam_label(s.H, s.T, s.S, s.F, cb); }

} // namespace pilotmae::tasks

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
#include "pilotmae/tensorcore/tensor.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace pilotmae::grid {

using chan::cfloat;

/// 3-axis patching of a T x S x F grid. Flat index p = i_t*n_s*n_f + i_s*n_f + i_f.
struct PatchConfig
{
    int T = 14, S = 32, F = 32;
    int p_t = 1, p_s = 4, p_f = 4;

    int n_t() const { return T / p_t; }
    int n_s() const { return S / p_s; }
    int n_f() const { return F / p_f; }
    int P() const { return n_t() * n_s() * n_f(); }
    int N_sf() const { return n_s() * n_f(); }
    int patch_elems() const { return p_t * p_s * p_f; }
    int D_p() const { return 2 * patch_elems(); }

    void validate() const
    {
        auto axis = [](const char *name, int grid, int patch) {
            if (grid <= 0 || patch <= 0)
                throw std::invalid_argument(std::string("patching: non-positive extent on axis ") + name);
            if (grid % patch != 0)
                throw std::invalid_argument(std::string("patching: axis ") + name + " extent " + std::to_string(grid) +
                                            " is not divisible by patch size " + std::to_string(patch));
        };
        axis("t", T, p_t);
        axis("s", S, p_s);
        axis("f", F, p_f);
    }

    int flat(int it, int is, int if_) const { return it * N_sf() + is * n_f() + if_; }
    std::array<int, 3> decode(int p) const { return {p / N_sf(), (p % N_sf()) / n_f(), p % n_f()}; }
};

/// Mean over a split of the per-element mean power.
inline double compute_pref(const std::vector<chan::ChannelSample> &split)
{
    if (split.empty())
        throw std::invalid_argument("compute_pref: empty split");
    double acc = 0;
    for (const auto &s : split)
        acc += s.mean_power();
    const double p = acc / static_cast<double>(split.size());
    if (!(p > 0))
        throw std::invalid_argument("compute_pref: zero reference power");
    return p;
}

/// H / sqrt(P_ref), element-wise.
inline std::vector<cfloat> normalize(const chan::ChannelSample &s, double pref)
{
    const float g = static_cast<float>(1.0 / std::sqrt(pref));
    std::vector<cfloat> out(s.H.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = s.H[i] * g;
    return out;
}

/// Grid cell of element e in patch p. Within a patch, elements run t, then s, then f.
inline std::size_t grid_offset(const PatchConfig &cfg, int p, int e)
{
    const auto [it, is, if_] = cfg.decode(p);
    const int dt = e / (cfg.p_s * cfg.p_f);
    const int ds = (e / cfg.p_f) % cfg.p_s;
    const int df = e % cfg.p_f;
    const int t = it * cfg.p_t + dt, s = is * cfg.p_s + ds, f = if_ * cfg.p_f + df;
    return (static_cast<std::size_t>(t) * cfg.S + s) * cfg.F + f;
}

/// Splits a complex grid into P rows of D_p reals: the real block then the imaginary block.
template <typename T>
tc::Tensor<T> patchify(const std::vector<cfloat> &H, const PatchConfig &cfg)
{
    cfg.validate();
    if (H.size() != static_cast<std::size_t>(cfg.T) * cfg.S * cfg.F)
        throw std::invalid_argument("patchify: grid size does not match patch config");
    const int E = cfg.patch_elems();
    tc::Tensor<T> out({cfg.P(), cfg.D_p()});
    for (int p = 0; p < cfg.P(); ++p)
    {
        T *row = out.row(p);
        for (int e = 0; e < E; ++e)
        {
            const cfloat h = H[grid_offset(cfg, p, e)];
            row[e] = static_cast<T>(h.real());
            row[E + e] = static_cast<T>(h.imag());
        }
    }
    return out;
}

/// Inverse of patchify for a full set of P patches.
template <typename T>
std::vector<cfloat> unpatchify(const tc::Tensor<T> &patches, const PatchConfig &cfg)
{
    if (patches.rows() != cfg.P() || patches.cols() != cfg.D_p())
        throw std::invalid_argument("unpatchify: expected " + std::to_string(cfg.P()) + "x" + std::to_string(cfg.D_p()) +
                                    " patches, got " + tc::shape_str(patches.shape()));
    const int E = cfg.patch_elems();
    std::vector<cfloat> H(static_cast<std::size_t>(cfg.T) * cfg.S * cfg.F);
    for (int p = 0; p < cfg.P(); ++p)
    {
        const T *row = patches.row(p);
        for (int e = 0; e < E; ++e)
            H[grid_offset(cfg, p, e)] = cfloat(static_cast<float>(row[e]), static_cast<float>(row[E + e]));
    }
    return H;
}

struct AxisWidths
{
    int t, s, f;
};

inline AxisWidths axial_widths(int d)
{
    if (d < 3)
        throw std::invalid_argument("axial positional embedding needs d >= 3");
    return {d / 3, d / 3, d - 2 * (d / 3)};
}

/// Fixed P x d table: per-axis sinusoids (sin at even, cos at odd slots, base
/// 10000) concatenated in (t, s, f) order.
template <typename T>
tc::Tensor<T> axial_pos_embed(const PatchConfig &cfg, int d)
{
    const AxisWidths w = axial_widths(d);
    auto axis = [](int i, int da, T *dst) {
        for (int j = 0; 2 * j < da; ++j)
        {
            const double ang = i * std::pow(10000.0, -2.0 * j / da);
            dst[2 * j] = static_cast<T>(std::sin(ang));
            if (2 * j + 1 < da)
                dst[2 * j + 1] = static_cast<T>(std::cos(ang));
        }
    };
    tc::Tensor<T> out({cfg.P(), d});
    for (int p = 0; p < cfg.P(); ++p)
    {
        const auto [it, is, if_] = cfg.decode(p);
        T *row = out.row(p);
        axis(it, w.t, row);
        axis(is, w.s, row + w.t);
        axis(if_, w.f, row + w.t + w.s);
    }
    return out;
}

/// Per-patch mean/variance over all D_p reals, normalized targets and scale targets.
template <typename T>
struct PatchStats
{
    std::vector<double> mean, var;
    tc::Tensor<T> z;     ///< (p - mu) / sqrt(var + eps_r)
    tc::Tensor<T> scale; ///< rows (mu, log(var + eps_s))
};

inline constexpr double kEpsRecon = 1e-6;
inline constexpr double kEpsScale = 1e-6;

template <typename T>
PatchStats<T> patch_stats(const tc::Tensor<T> &patches, double eps_r = kEpsRecon, double eps_s = kEpsScale)
{
    const int n = patches.rows(), D = patches.cols();
    if (D < 2)
        throw std::invalid_argument("patch_stats: patches need at least 2 reals");
    PatchStats<T> st;
    st.mean.resize(static_cast<std::size_t>(n));
    st.var.resize(static_cast<std::size_t>(n));
    st.z = tc::Tensor<T>({n, D});
    st.scale = tc::Tensor<T>({n, 2});
    for (int i = 0; i < n; ++i)
    {
        const T *row = patches.row(i);
        double mu = 0;
        for (int j = 0; j < D; ++j)
            mu += row[j];
        mu /= D;
        double var = 0;
        for (int j = 0; j < D; ++j)
            var += (row[j] - mu) * (row[j] - mu);
        var /= D;
        st.mean[static_cast<std::size_t>(i)] = mu;
        st.var[static_cast<std::size_t>(i)] = var;
        const double inv = 1.0 / std::sqrt(var + eps_r);
        for (int j = 0; j < D; ++j)
            st.z.at(i, j) = static_cast<T>((row[j] - mu) * inv);
        st.scale.at(i, 0) = static_cast<T>(mu);
        st.scale.at(i, 1) = static_cast<T>(std::log(var + eps_s));
    }
    return st;
}

} // namespace pilotmae::grid

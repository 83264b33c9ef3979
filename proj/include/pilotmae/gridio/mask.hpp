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

#include "pilotmae/gridio/patch.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace pilotmae::grid {

enum class MaskSource
{
    random,
    pilot
};

/// Rectangular keep set: the same spectro-spatial positions in every kept
/// temporal patch. Tokens are ordered kept-t major, then kept position.
///
/// A scattered set (flat indices in `scattered`, kept_t/kept_sf empty) is
/// also representable for joint encoders, which do not need the grid; it is
/// treated as one row of tokens.
struct MaskSpec
{
    std::vector<int> kept_t;
    std::vector<int> kept_sf;
    std::vector<int> scattered;
    int n_t = 0;
    int N_sf = 0;
    MaskSource source = MaskSource::random;

    bool rectangular() const { return scattered.empty(); }
    int n_k() const { return rectangular() ? static_cast<int>(kept_t.size()) : 1; }
    int n_sf() const { return rectangular() ? static_cast<int>(kept_sf.size()) : static_cast<int>(scattered.size()); }
    int num_visible() const { return n_k() * n_sf(); }
    int num_total() const { return n_t * N_sf; }
    double visible_fraction() const { return static_cast<double>(num_visible()) / num_total(); }
    double mask_ratio() const { return 1.0 - visible_fraction(); }

    std::vector<int> visible_indices() const
    {
        if (!rectangular())
            return scattered;
        std::vector<int> idx;
        idx.reserve(static_cast<std::size_t>(num_visible()));
        for (int t : kept_t)
            for (int sf : kept_sf)
                idx.push_back(t * N_sf + sf);
        return idx;
    }

    std::vector<int> masked_indices() const
    {
        std::vector<char> vis(static_cast<std::size_t>(num_total()), 0);
        for (int p : visible_indices())
            vis[static_cast<std::size_t>(p)] = 1;
        std::vector<int> idx;
        for (int p = 0; p < num_total(); ++p)
            if (!vis[static_cast<std::size_t>(p)])
                idx.push_back(p);
        return idx;
    }

    void validate() const
    {
        auto strictly_increasing_in = [](const std::vector<int> &v, int bound, const char *what) {
            if (v.empty())
                throw std::invalid_argument(std::string("mask: empty ") + what);
            for (std::size_t i = 0; i < v.size(); ++i)
                if (v[i] < 0 || v[i] >= bound || (i > 0 && v[i] <= v[i - 1]))
                    throw std::invalid_argument(std::string("mask: ") + what + " must be unique, sorted, in range");
        };
        if (!rectangular())
        {
            if (!kept_t.empty() || !kept_sf.empty())
                throw std::invalid_argument("mask: scattered and rectangular keep sets are exclusive");
            strictly_increasing_in(scattered, n_t * N_sf, "scattered tokens");
            return;
        }
        strictly_increasing_in(kept_t, n_t, "kept temporal patches");
        strictly_increasing_in(kept_sf, N_sf, "kept spectro-spatial positions");
    }

    static MaskSpec full(const PatchConfig &cfg)
    {
        MaskSpec m;
        m.n_t = cfg.n_t();
        m.N_sf = cfg.N_sf();
        m.kept_t.resize(static_cast<std::size_t>(m.n_t));
        m.kept_sf.resize(static_cast<std::size_t>(m.N_sf));
        std::iota(m.kept_t.begin(), m.kept_t.end(), 0);
        std::iota(m.kept_sf.begin(), m.kept_sf.end(), 0);
        return m;
    }
};

/// N'_sf = max(1, floor(rho_k * N_sf)). A tiny slack absorbs representation
/// error in rho_k (3/18 * 18 must give 3).
inline int kept_positions(int N_sf, double rho_k)
{
    return std::max(1, static_cast<int>(std::floor(rho_k * N_sf + 1e-9)));
}

namespace detail {

inline std::vector<int> choose_sorted(int n, int k, std::mt19937_64 &rng)
{
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < k; ++i)
    {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
    }
    all.resize(static_cast<std::size_t>(k));
    std::sort(all.begin(), all.end());
    return all;
}

} // namespace detail

inline MaskSpec build_random_mask(const PatchConfig &cfg, int n_k, double rho_k, std::mt19937_64 &rng)
{
    if (n_k < 1 || n_k > cfg.n_t())
        throw std::invalid_argument("build_random_mask: n_k=" + std::to_string(n_k) + " outside [1," +
                                    std::to_string(cfg.n_t()) + "]");
    if (!(rho_k > 0.0 && rho_k <= 1.0))
        throw std::invalid_argument("build_random_mask: rho_k must lie in (0,1]");
    MaskSpec m;
    m.n_t = cfg.n_t();
    m.N_sf = cfg.N_sf();
    m.source = MaskSource::random;
    m.kept_t = detail::choose_sorted(m.n_t, n_k, rng);
    m.kept_sf = detail::choose_sorted(m.N_sf, kept_positions(m.N_sf, rho_k), rng);
    return m;
}

/// Unstructured keep set of round((1 - mask_ratio) * P) tokens, at least one.
inline MaskSpec build_scattered_mask(const PatchConfig &cfg, double mask_ratio, std::mt19937_64 &rng)
{
    if (!(mask_ratio >= 0.0 && mask_ratio < 1.0))
        throw std::invalid_argument("build_scattered_mask: mask ratio must lie in [0,1)");
    MaskSpec m;
    m.n_t = cfg.n_t();
    m.N_sf = cfg.N_sf();
    m.source = MaskSource::random;
    const int keep = std::max(1, static_cast<int>(std::lround((1.0 - mask_ratio) * cfg.P())));
    m.scattered = detail::choose_sorted(cfg.P(), keep, rng);
    return m;
}

struct PilotPattern
{
    std::vector<int> symbols;
    std::vector<int> subcarriers;

    int num_res() const { return static_cast<int>(symbols.size() * subcarriers.size()); }

    /// Front-loaded plus additional reference symbols, four of every eight subcarriers.
    static PilotPattern standard()
    {
        return {{2, 11}, {0, 1, 2, 3, 8, 9, 10, 11, 16, 17, 18, 19, 24, 25, 26, 27}};
    }
};

/// Pilot REs observe every antenna. Each pilot index set must tile whole
/// patches along its axis.
inline MaskSpec build_pilot_mask(const PatchConfig &cfg, const PilotPattern &pat)
{
    cfg.validate();
    auto kept_patches = [](const std::vector<int> &idx, int extent, int patch, const char *axis) {
        std::set<int> s(idx.begin(), idx.end());
        if (s.size() != idx.size())
            throw std::invalid_argument(std::string("pilot pattern: duplicate ") + axis + " index");
        std::vector<int> kept;
        for (int v : s)
            if (v < 0 || v >= extent)
                throw std::invalid_argument(std::string("pilot pattern: ") + axis + " index " + std::to_string(v) +
                                            " out of range");
        for (int p = 0; p < extent / patch; ++p)
        {
            int hits = 0;
            for (int e = 0; e < patch; ++e)
                hits += static_cast<int>(s.count(p * patch + e));
            if (hits == patch)
                kept.push_back(p);
            else if (hits != 0)
                throw std::invalid_argument(std::string("pilot pattern: ") + axis + " indices do not align to patch " +
                                            std::to_string(p) + " (partial-patch pilots unsupported)");
        }
        if (kept.empty())
            throw std::invalid_argument(std::string("pilot pattern: no ") + axis + " pilots");
        return kept;
    };
    const auto kt = kept_patches(pat.symbols, cfg.T, cfg.p_t, "symbol");
    const auto kf = kept_patches(pat.subcarriers, cfg.F, cfg.p_f, "subcarrier");
    MaskSpec m;
    m.n_t = cfg.n_t();
    m.N_sf = cfg.N_sf();
    m.source = MaskSource::pilot;
    m.kept_t = kt;
    for (int is = 0; is < cfg.n_s(); ++is)
        for (int f : kf)
            m.kept_sf.push_back(is * cfg.n_f() + f);
    return m;
}

} // namespace pilotmae::grid

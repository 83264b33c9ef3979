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
#include "pilotmae/tensorcore/parallel.hpp"

#include <cmath>
#include <numbers>

namespace pilotmae::chan {

/// Half-wavelength UPA response with unit-modulus elements. Element s = n_v*N_h + n_h
/// has phase pi*(n_h*sin(az)cos(el) + n_v*sin(el)).
inline std::vector<cdouble> upa_steering(int N_h, int N_v, double azimuth, double elevation)
{
    const double dh = std::sin(azimuth) * std::cos(elevation);
    const double dv = std::sin(elevation);
    std::vector<cdouble> u(static_cast<std::size_t>(N_h * N_v));
    for (int nv = 0; nv < N_v; ++nv)
        for (int nh = 0; nh < N_h; ++nh)
            u[static_cast<std::size_t>(nv * N_h + nh)] = std::polar(1.0, std::numbers::pi * (nh * dh + nv * dv));
    return u;
}

/// Large-scale gain in dB: close-in free-space reference at 1 m plus
/// log-distance decay and the drawn shadowing term.
inline double large_scale_gain_db(const PathSet &ps, double carrier)
{
    const double fspl_1m = 20.0 * std::log10(4.0 * std::numbers::pi * carrier / kSpeedOfLight);
    return -(fspl_1m + 10.0 * ps.pathloss_exp * std::log10(ps.distance)) + ps.shadowing_db;
}

/// Draws one link geometry. LoS links put the direct path first at zero delay
/// with power fraction K/(K+1); scattered clusters carry the rest.
inline PathSet sample_scene(const ScenarioConfig &cfg, std::mt19937_64 &rng)
{
    cfg.validate();
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    const double deg = std::numbers::pi / 180.0;
    const double az_span = cfg.azimuth_span_deg * deg;
    const double cp = cfg.cp_duration();

    PathSet ps;
    ps.los = u01(rng) < cfg.los_probability;
    ps.speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * u01(rng);
    // Uniform over an annulus of user positions.
    const double r2 = cfg.distance_min * cfg.distance_min +
                      (cfg.distance_max * cfg.distance_max - cfg.distance_min * cfg.distance_min) * u01(rng);
    ps.distance = std::sqrt(r2);
    ps.pathloss_exp = ps.los ? cfg.pathloss_exp_los : cfg.pathloss_exp_nlos;
    ps.shadowing_db = (ps.los ? cfg.shadowing_db_los : cfg.shadowing_db_nlos) * n01(rng);

    auto draw_az = [&] { return -az_span + 2.0 * az_span * u01(rng); };
    auto draw_el = [&] { return (cfg.elevation_min_deg + (cfg.elevation_max_deg - cfg.elevation_min_deg) * u01(rng)) * deg; };
    auto draw_cos = [&] { return std::cos(2.0 * std::numbers::pi * u01(rng)); };
    auto draw_phase = [&] { return 2.0 * std::numbers::pi * u01(rng); };

    double los_az = 0, los_el = 0;
    if (ps.los)
    {
        los_az = draw_az();
        los_el = draw_el();
        const double kdb = cfg.rician_k_db_min + (cfg.rician_k_db_max - cfg.rician_k_db_min) * u01(rng);
        ps.rician_k = std::pow(10.0, kdb / 10.0);
        ps.paths.push_back(Path{std::polar(1.0, draw_phase()), 0.0, draw_cos(), los_az, los_el});
    }

    std::uniform_int_distribution<int> ncl(cfg.clusters_min, cfg.clusters_max);
    const int clusters = ncl(rng);
    const double spread = cfg.cluster_angle_spread_deg * deg;
    const std::size_t first_scattered = ps.paths.size();
    for (int c = 0; c < clusters; ++c)
    {
        // Cluster delays stay inside the cyclic prefix; strictly positive.
        const double tau_c = cp * (0.05 + 0.8 * u01(rng));
        const double power_c = std::exp(-tau_c / (0.4 * cp)) * std::pow(10.0, 0.3 * n01(rng));
        double az_c = draw_az(), el_c = draw_el();
        if (ps.los && c == 0)
        {
            // Ground reflection near the direct path.
            az_c = los_az + 0.5 * spread * n01(rng);
            el_c = los_el - std::abs(spread * n01(rng));
        }
        for (int r = 0; r < cfg.rays_per_cluster; ++r)
        {
            Path p;
            p.delay = std::min(cp, tau_c + 0.1 * cp * u01(rng));
            p.azimuth = az_c + spread * n01(rng);
            p.elevation = el_c + 0.5 * spread * n01(rng);
            p.doppler_cos = draw_cos();
            p.gain = std::polar(std::sqrt(power_c / cfg.rays_per_cluster), draw_phase());
            ps.paths.push_back(p);
        }
    }
    if (ps.paths.empty())
        throw std::logic_error("sample_scene: empty path set");

    double scattered = 0;
    for (std::size_t i = first_scattered; i < ps.paths.size(); ++i)
        scattered += std::norm(ps.paths[i].gain);
    const double scattered_target = ps.los ? 1.0 / (ps.rician_k + 1.0) : 1.0;
    const double sc = std::sqrt(scattered_target / scattered);
    for (std::size_t i = first_scattered; i < ps.paths.size(); ++i)
        ps.paths[i].gain *= sc;
    if (ps.los)
        ps.paths[0].gain *= std::sqrt(ps.rician_k / (ps.rician_k + 1.0));
    return ps;
}

/// Renders H[t,s,f] = sqrt(P_LS) sum_p g_p e^{j2pi nu_p t T_sym} e^{-j2pi tau_p f df} u_p[s]
/// at cfg.carrier.
inline ChannelSample synthesize_channel(const PathSet &ps, const ScenarioConfig &cfg, std::uint64_t id = 0)
{
    ChannelSample out;
    out.id = id;
    out.los = ps.los;
    out.speed = static_cast<float>(ps.speed);
    out.carrier = cfg.carrier;
    out.T = cfg.T;
    out.S = cfg.S();
    out.F = cfg.F;
    const double ls_db = large_scale_gain_db(ps, cfg.carrier);
    out.large_scale_db = static_cast<float>(ls_db);
    const double amp = std::pow(10.0, ls_db / 20.0);

    std::vector<cdouble> acc(cfg.numel(), cdouble(0, 0));
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<cdouble> tf(static_cast<std::size_t>(cfg.T * cfg.F));
    for (const auto &p : ps.paths)
    {
        const double nu = ps.doppler(p, cfg.carrier);
        const auto u = upa_steering(cfg.N_h, cfg.N_v, p.azimuth, p.elevation);
        for (int t = 0; t < cfg.T; ++t)
            for (int f = 0; f < cfg.F; ++f)
                tf[static_cast<std::size_t>(t * cfg.F + f)] =
                    amp * p.gain *
                    std::polar(1.0, two_pi * (nu * t * cfg.symbol_duration() - p.delay * f * cfg.subcarrier_spacing));
        for (int t = 0; t < cfg.T; ++t)
            for (int s = 0; s < cfg.S(); ++s)
            {
                cdouble *dst = &acc[(static_cast<std::size_t>(t) * cfg.S() + s) * cfg.F];
                const cdouble us = u[static_cast<std::size_t>(s)];
                const cdouble *src = &tf[static_cast<std::size_t>(t * cfg.F)];
                for (int f = 0; f < cfg.F; ++f)
                    dst[f] += src[f] * us;
            }
    }
    out.H.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i)
    {
        if (!std::isfinite(acc[i].real()) || !std::isfinite(acc[i].imag()))
            throw std::runtime_error("synthesize_channel: non-finite output for sample " + std::to_string(id));
        out.H[i] = cfloat(static_cast<float>(acc[i].real()), static_cast<float>(acc[i].imag()));
    }
    return out;
}

/// Sample `id` depends only on (cfg.seed, id).
inline PathSet scene_for(const ScenarioConfig &cfg, std::uint64_t id)
{
    auto rng = stream_rng(cfg.seed, id);
    return sample_scene(cfg, rng);
}

inline ChannelSample generate_sample(const ScenarioConfig &cfg, std::uint64_t id)
{
    return synthesize_channel(scene_for(cfg, id), cfg, id);
}

inline std::vector<ChannelSample> generate_dataset(const ScenarioConfig &cfg, std::size_t count,
                                                   std::uint64_t first_id = 0, int threads = 1)
{
    cfg.validate();
    std::vector<ChannelSample> out(count);
    tc::parallel_for(static_cast<int>(count), threads,
                     [&](int i) { out[static_cast<std::size_t>(i)] = generate_sample(cfg, first_id + static_cast<std::uint64_t>(i)); });
    return out;
}

/// Same geometry rendered at a second carrier: Doppler and path loss rescale.
inline std::vector<ChannelSample> generate_dual_carrier(const ScenarioConfig &cfg, double second_carrier,
                                                        std::size_t count, std::uint64_t first_id = 0, int threads = 1)
{
    ScenarioConfig other = cfg;
    other.carrier = second_carrier;
    std::vector<ChannelSample> out(count);
    tc::parallel_for(static_cast<int>(count), threads, [&](int i) {
        const auto id = first_id + static_cast<std::uint64_t>(i);
        out[static_cast<std::size_t>(i)] = synthesize_channel(scene_for(cfg, id), other, id);
    });
    return out;
}

} // namespace pilotmae::chan

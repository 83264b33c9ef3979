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

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pilotmae::chan {

using cfloat = std::complex<float>;
using cdouble = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Counter-based seeding: mixes (seed, stream id) into one 64-bit state.
inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t id, std::uint64_t salt = 0)
{
    return splitmix64(splitmix64(splitmix64(seed) ^ id) ^ salt);
}

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t id, std::uint64_t salt = 0)
{
    return std::mt19937_64(stream_key(seed, id, salt));
}

struct ScenarioConfig
{
    int T = 14;
    int N_h = 8;
    int N_v = 4;
    int F = 32;
    double subcarrier_spacing = 30e3;
    double cp_overhead = 288.0 / 4096.0;
    double carrier = 3.5e9;
    double speed_min = 8.0;
    double speed_max = 30.0;
    double los_probability = 0.4;
    double rician_k_db_min = 3.0;
    double rician_k_db_max = 12.0;
    int clusters_min = 2;
    int clusters_max = 4;
    int rays_per_cluster = 4;
    double cluster_angle_spread_deg = 4.0;
    double azimuth_span_deg = 60.0;
    double elevation_min_deg = -25.0;
    double elevation_max_deg = 5.0;
    double distance_min = 20.0;
    double distance_max = 400.0;
    double pathloss_exp_los = 2.2;
    double pathloss_exp_nlos = 3.5;
    double shadowing_db_los = 4.0;
    double shadowing_db_nlos = 7.0;
    std::uint64_t seed = 1;

    int S() const { return N_h * N_v; }
    std::size_t numel() const { return static_cast<std::size_t>(T) * S() * F; }
    double symbol_duration() const { return (1.0 + cp_overhead) / subcarrier_spacing; }
    double cp_duration() const { return cp_overhead / subcarrier_spacing; }
    double max_doppler(double speed) const { return speed * carrier / kSpeedOfLight; }

    void validate() const
    {
        auto req = [](bool ok, const std::string &what) {
            if (!ok)
                throw std::invalid_argument("scenario: " + what);
        };
        req(T > 0 && N_h > 0 && N_v > 0 && F > 0, "grid extents must be positive");
        req(subcarrier_spacing > 0 && cp_overhead >= 0, "invalid numerology");
        req(carrier > 0, "carrier must be positive");
        req(0 <= speed_min && speed_min <= speed_max, "invalid speed range");
        req(0 <= los_probability && los_probability <= 1, "los_probability outside [0,1]");
        req(rician_k_db_min <= rician_k_db_max, "invalid Rician K range");
        req(1 <= clusters_min && clusters_min <= clusters_max, "invalid cluster count range");
        req(rays_per_cluster >= 1, "rays_per_cluster must be >= 1");
        req(0 < distance_min && distance_min <= distance_max, "invalid distance range");
        req(elevation_min_deg <= elevation_max_deg, "invalid elevation range");
    }
};

struct Path
{
    cdouble gain;
    double delay = 0;       ///< seconds
    double doppler_cos = 0; ///< cosine between motion and arrival direction
    double azimuth = 0;     ///< radians
    double elevation = 0;   ///< radians
};

/// Carrier-independent geometry of one link. Doppler and path loss are
/// evaluated at synthesis time, so one PathSet can be rendered at two carriers.
struct PathSet
{
    std::vector<Path> paths;
    bool los = false;
    double rician_k = 0; ///< linear, LoS only
    double speed = 0;
    double distance = 0;
    double shadowing_db = 0;
    double pathloss_exp = 0;

    double doppler(const Path &p, double carrier) const { return speed * carrier / kSpeedOfLight * p.doppler_cos; }
    double total_power() const
    {
        double s = 0;
        for (const auto &p : paths)
            s += std::norm(p.gain);
        return s;
    }
};

/// Dense channel H[t, s, f], stored t-major, then antenna, then subcarrier.
struct ChannelSample
{
    std::uint64_t id = 0;
    bool los = false;
    float speed = 0;
    float large_scale_db = 0;
    double carrier = 0;
    int T = 0, S = 0, F = 0;
    std::vector<cfloat> H;

    std::size_t index(int t, int s, int f) const
    {
        return (static_cast<std::size_t>(t) * S + s) * F + f;
    }
    cfloat &at(int t, int s, int f) { return H[index(t, s, f)]; }
    const cfloat &at(int t, int s, int f) const { return H[index(t, s, f)]; }

    double mean_power() const
    {
        double p = 0;
        for (const auto &h : H)
            p += std::norm(std::complex<double>(h));
        return p / static_cast<double>(H.size());
    }
};

} // namespace pilotmae::chan

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

#include <bit>
#include <cstring>
#include <fstream>
#include <optional>

#include "json.hpp"

namespace pilotmae::chan {

static_assert(std::endian::native == std::endian::little, "shard IO assumes a little-endian host");

inline constexpr char kShardMagic[4] = {'P', 'W', 'C', 'H'};
inline constexpr std::uint32_t kShardVersion = 1;

class ShardError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct ShardHeader
{
    std::uint32_t version = kShardVersion;
    std::uint32_t T = 0, S = 0, F = 0;
    std::uint64_t count = 0;
    double carrier = 0;
};

namespace detail {

template <typename V>
void put(std::ostream &os, const V &v)
{
    os.write(reinterpret_cast<const char *>(&v), sizeof(V));
}

template <typename V>
V get(std::istream &is, const std::string &what)
{
    V v{};
    if (!is.read(reinterpret_cast<char *>(&v), sizeof(V)))
        throw ShardError("truncated shard while reading " + what);
    return v;
}

} // namespace detail

/// Writes samples in the binary shard layout. All samples must share T, S, F and carrier.
inline std::size_t write_shard(const std::vector<ChannelSample> &samples, const std::string &path)
{
    if (samples.empty())
        throw ShardError("write_shard: no samples");
    const auto &s0 = samples.front();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw ShardError("cannot open " + path + " for writing");
    os.write(kShardMagic, 4);
    detail::put(os, kShardVersion);
    detail::put(os, static_cast<std::uint32_t>(s0.T));
    detail::put(os, static_cast<std::uint32_t>(s0.S));
    detail::put(os, static_cast<std::uint32_t>(s0.F));
    detail::put(os, static_cast<std::uint64_t>(samples.size()));
    detail::put(os, s0.carrier);
    for (const auto &s : samples)
    {
        if (s.T != s0.T || s.S != s0.S || s.F != s0.F || s.carrier != s0.carrier)
            throw ShardError("write_shard: inconsistent sample dimensions or carrier at id " + std::to_string(s.id));
        if (s.H.size() != static_cast<std::size_t>(s.T) * s.S * s.F)
            throw ShardError("write_shard: tensor length mismatch at id " + std::to_string(s.id));
        detail::put(os, s.id);
        detail::put(os, static_cast<std::uint8_t>(s.los ? 1 : 0));
        detail::put(os, s.speed);
        detail::put(os, s.large_scale_db);
        // complex<float> is laid out as (re, im).
        os.write(reinterpret_cast<const char *>(s.H.data()), static_cast<std::streamsize>(s.H.size() * sizeof(cfloat)));
    }
    if (!os)
        throw ShardError("write error on " + path);
    return samples.size();
}

inline ShardHeader read_shard_header(std::istream &is)
{
    char magic[4];
    if (!is.read(magic, 4))
        throw ShardError("truncated shard header");
    if (std::memcmp(magic, kShardMagic, 4) != 0)
        throw ShardError("bad magic");
    ShardHeader h;
    h.version = detail::get<std::uint32_t>(is, "version");
    if (h.version != kShardVersion)
        throw ShardError("version mismatch: file " + std::to_string(h.version) + ", expected " + std::to_string(kShardVersion));
    h.T = detail::get<std::uint32_t>(is, "T");
    h.S = detail::get<std::uint32_t>(is, "S");
    h.F = detail::get<std::uint32_t>(is, "F");
    h.count = detail::get<std::uint64_t>(is, "count");
    h.carrier = detail::get<double>(is, "carrier");
    return h;
}

/// Reads a shard. When `expect` is given, header dimensions must match it.
inline std::vector<ChannelSample> read_shard(const std::string &path, std::optional<ScenarioConfig> expect = std::nullopt)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ShardError("cannot open " + path);
    const ShardHeader h = read_shard_header(is);
    if (expect && (h.T != static_cast<std::uint32_t>(expect->T) || h.S != static_cast<std::uint32_t>(expect->S()) ||
                   h.F != static_cast<std::uint32_t>(expect->F)))
        throw ShardError("dimension mismatch: shard is " + std::to_string(h.T) + "x" + std::to_string(h.S) + "x" +
                         std::to_string(h.F) + ", config expects " + std::to_string(expect->T) + "x" +
                         std::to_string(expect->S()) + "x" + std::to_string(expect->F));
    const std::size_t n = static_cast<std::size_t>(h.T) * h.S * h.F;
    std::vector<ChannelSample> out;
    out.reserve(static_cast<std::size_t>(h.count));
    for (std::uint64_t i = 0; i < h.count; ++i)
    {
        ChannelSample s;
        s.T = static_cast<int>(h.T);
        s.S = static_cast<int>(h.S);
        s.F = static_cast<int>(h.F);
        s.carrier = h.carrier;
        s.id = detail::get<std::uint64_t>(is, "sample id");
        s.los = detail::get<std::uint8_t>(is, "los flag") != 0;
        s.speed = detail::get<float>(is, "speed");
        s.large_scale_db = detail::get<float>(is, "large-scale gain");
        s.H.resize(n);
        if (!is.read(reinterpret_cast<char *>(s.H.data()), static_cast<std::streamsize>(n * sizeof(cfloat))))
            throw ShardError("truncated shard in sample " + std::to_string(i));
        out.push_back(std::move(s));
    }
    return out;
}

/// Sidecar manifest next to a shard: config echo, seed, count, and config hash.
inline void write_manifest(const std::string &path, const nlohmann::json &config_echo, std::uint64_t seed,
                           std::size_t count, const std::string &config_hash, const nlohmann::json &extra = {})
{
    nlohmann::json m;
    m["format"] = "PWCH";
    m["version"] = kShardVersion;
    m["seed"] = seed;
    m["count"] = count;
    m["config_hash"] = config_hash;
    m["config"] = config_echo;
    if (!extra.is_null())
        m["extra"] = extra;
    std::ofstream os(path);
    if (!os)
        throw ShardError("cannot open " + path + " for writing");
    os << m.dump(2) << '\n';
}

} // namespace pilotmae::chan

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

#include "pilotmae/model/mae.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "json.hpp"

namespace pilotmae::model {

using nlohmann::json;

/// Throws if `j` holds a key outside `allowed`.
inline void reject_unknown_keys(const json &j, const std::set<std::string> &allowed, const std::string &section)
{
    if (!j.is_object())
        throw std::invalid_argument("config section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("unknown key '" + it.key() + "' in section '" + section + "'");
}

template <typename V>
void read_opt(const json &j, const char *key, V &dst)
{
    if (j.contains(key))
        dst = j.at(key).get<V>();
}

inline json patch_to_json(const grid::PatchConfig &p)
{
    return {{"grid", {p.T, p.S, p.F}}, {"patch", {p.p_t, p.p_s, p.p_f}}};
}

inline void patch_from_json(const json &j, grid::PatchConfig &p)
{
    reject_unknown_keys(j, {"grid", "patch"}, "patching");
    if (j.contains("grid"))
    {
        auto g = j.at("grid").get<std::vector<int>>();
        if (g.size() != 3)
            throw std::invalid_argument("patching.grid must list 3 extents");
        p.T = g[0], p.S = g[1], p.F = g[2];
    }
    if (j.contains("patch"))
    {
        auto q = j.at("patch").get<std::vector<int>>();
        if (q.size() != 3)
            throw std::invalid_argument("patching.patch must list 3 extents");
        p.p_t = q[0], p.p_s = q[1], p.p_f = q[2];
    }
}

inline json model_to_json(const ModelConfig &c)
{
    return {{"d", c.d},
            {"encoder", to_string(c.encoder)},
            {"enc_blocks", c.enc_blocks},
            {"enc_heads", c.enc_heads},
            {"dec_layers", c.dec_layers},
            {"dec_heads", c.dec_heads},
            {"ffn_mult", c.ffn_mult},
            {"alpha_pe", c.alpha_pe}};
}

inline void model_from_json(const json &j, ModelConfig &c)
{
    reject_unknown_keys(j, {"d", "encoder", "enc_blocks", "enc_heads", "dec_layers", "dec_heads", "ffn_mult", "alpha_pe"},
                        "model");
    read_opt(j, "d", c.d);
    if (j.contains("encoder"))
        c.encoder = encoder_kind_from(j.at("encoder").get<std::string>());
    read_opt(j, "enc_blocks", c.enc_blocks);
    read_opt(j, "enc_heads", c.enc_heads);
    read_opt(j, "dec_layers", c.dec_layers);
    read_opt(j, "dec_heads", c.dec_heads);
    read_opt(j, "ffn_mult", c.ffn_mult);
    read_opt(j, "alpha_pe", c.alpha_pe);
}

inline constexpr char kCheckpointMagic[4] = {'P', 'W', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <typename V>
void put(std::ostream &os, const V &v)
{
    os.write(reinterpret_cast<const char *>(&v), sizeof(V));
}

template <typename V>
V get(std::istream &is)
{
    V v{};
    if (!is.read(reinterpret_cast<char *>(&v), sizeof(V)))
        throw CheckpointError("truncated checkpoint");
    return v;
}

inline void put_string(std::ostream &os, const std::string &s)
{
    put(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream &is)
{
    const auto n = get<std::uint32_t>(is);
    std::string s(n, '\0');
    if (!is.read(s.data(), n))
        throw CheckpointError("truncated checkpoint");
    return s;
}

} // namespace detail

/// Header: magic, version, JSON metadata (model config echo plus caller
/// fields), P_ref; then named f32 tensors.
template <typename T>
void save_checkpoint(MaskedAutoencoder<T> &m, const std::string &path, const json &meta = json::object())
{
    static_assert(std::endian::native == std::endian::little);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw CheckpointError("cannot open " + path + " for writing");
    json header = meta;
    header["model"] = model_to_json(m.config());
    header["patching"] = patch_to_json(m.config().patch);
    os.write(kCheckpointMagic, 4);
    detail::put(os, kCheckpointVersion);
    detail::put_string(os, header.dump());
    detail::put(os, m.pref);
    const auto params = m.all_params();
    detail::put(os, static_cast<std::uint32_t>(params.size()));
    for (const auto *p : params)
    {
        detail::put_string(os, p->name);
        detail::put(os, static_cast<std::uint32_t>(p->value.shape().size()));
        for (int e : p->value.shape())
            detail::put(os, static_cast<std::uint32_t>(e));
        for (T v : p->value.values())
            detail::put(os, static_cast<float>(v));
    }
    if (!os)
        throw CheckpointError("write error on " + path);
}

template <typename T>
std::unique_ptr<MaskedAutoencoder<T>> load_checkpoint(const std::string &path, json *meta_out = nullptr)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw CheckpointError("cannot open checkpoint " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw CheckpointError("bad magic in " + path);
    if (detail::get<std::uint32_t>(is) != kCheckpointVersion)
        throw CheckpointError("checkpoint version mismatch in " + path);
    const json header = json::parse(detail::get_string(is));
    ModelConfig cfg;
    patch_from_json(header.at("patching"), cfg.patch);
    model_from_json(header.at("model"), cfg);
    auto m = std::make_unique<MaskedAutoencoder<T>>(cfg, 0);
    m->pref = detail::get<double>(is);
    const auto n = detail::get<std::uint32_t>(is);
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < n; ++i)
    {
        const std::string name = detail::get_string(is);
        const auto ndim = detail::get<std::uint32_t>(is);
        tc::Shape shape;
        for (std::uint32_t k = 0; k < ndim; ++k)
            shape.push_back(static_cast<int>(detail::get<std::uint32_t>(is)));
        Parameter<T> *p = m->encoder_params().find(name);
        if (!p)
            p = m->decoder_params().find(name);
        if (!p)
            throw CheckpointError("checkpoint tensor '" + name + "' has no matching parameter");
        if (p->value.shape() != shape)
            throw CheckpointError("shape mismatch for '" + name + "': file " + tc::shape_str(shape) + ", model " +
                                  tc::shape_str(p->value.shape()));
        for (T &v : p->value.values())
            v = static_cast<T>(detail::get<float>(is));
        seen.insert(name);
    }
    for (auto *p : m->all_params())
        if (!seen.count(p->name))
            throw CheckpointError("checkpoint is missing tensor '" + p->name + "'");
    if (meta_out)
        *meta_out = header;
    return m;
}

} // namespace pilotmae::model

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

#include "pilotmae/tensorcore/graph.hpp"
#include "pilotmae/tensorcore/ops.hpp"

#include <deque>
#include <map>
#include <random>

namespace pilotmae::model {

using tc::Graph;
using tc::Parameter;
using tc::Tensor;
using tc::Var;

/// Owns parameters with stable addresses; modules keep raw pointers into it.
template <typename T>
class ParamStore
{
public:
    Parameter<T> &add(const std::string &name, Tensor<T> init)
    {
        if (index_.count(name))
            throw std::invalid_argument("duplicate parameter name " + name);
        params_.emplace_back(name, std::move(init));
        index_[name] = &params_.back();
        return params_.back();
    }

    Parameter<T> *find(const std::string &name)
    {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : it->second;
    }

    std::vector<Parameter<T> *> all()
    {
        std::vector<Parameter<T> *> out;
        for (auto &p : params_)
            out.push_back(&p);
        return out;
    }

    /// Parameters whose name starts with prefix.
    std::vector<Parameter<T> *> with_prefix(const std::string &prefix)
    {
        std::vector<Parameter<T> *> out;
        for (auto &p : params_)
            if (p.name.rfind(prefix, 0) == 0)
                out.push_back(&p);
        return out;
    }

    std::size_t count(const std::string &prefix = "") const
    {
        std::size_t n = 0;
        for (const auto &p : params_)
            if (p.name.rfind(prefix, 0) == 0)
                n += p.numel();
        return n;
    }

    std::deque<Parameter<T>> &raw() { return params_; }

private:
    std::deque<Parameter<T>> params_;
    std::map<std::string, Parameter<T> *> index_;
};

/// Truncated normal (resampled outside +-2 std).
template <typename T>
Tensor<T> trunc_normal(tc::Shape shape, double std, std::mt19937_64 &rng)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Tensor<T> t(std::move(shape));
    for (auto &v : t.values())
    {
        double x;
        do
            x = nd(rng);
        while (std::abs(x) > 2.0);
        v = static_cast<T>(x * std);
    }
    return t;
}

inline constexpr double kInitStd = 0.02;

template <typename T>
struct Linear
{
    Parameter<T> *w = nullptr;
    Parameter<T> *b = nullptr;

    Linear() = default;
    Linear(ParamStore<T> &ps, const std::string &name, int in, int out, std::mt19937_64 &rng, bool bias = true)
    {
        w = &ps.add(name + ".w", trunc_normal<T>({in, out}, kInitStd, rng));
        if (bias)
            b = &ps.add(name + ".b", Tensor<T>({1, out}));
    }

    Var<T> operator()(Graph<T> &g, Var<T> x) const
    {
        return tc::linear(x, g.param(*w), b ? g.param(*b) : Var<T>{});
    }
};

template <typename T>
struct LayerNorm
{
    Parameter<T> *gain = nullptr;
    Parameter<T> *bias = nullptr;
    T eps = T(1e-5);

    LayerNorm() = default;
    LayerNorm(ParamStore<T> &ps, const std::string &name, int d)
    {
        gain = &ps.add(name + ".g", Tensor<T>({1, d}, T(1)));
        bias = &ps.add(name + ".b", Tensor<T>({1, d}));
    }

    Var<T> operator()(Graph<T> &g, Var<T> x) const { return tc::layer_norm(x, g.param(*gain), g.param(*bias), eps); }
};

/// Pre-norm multi-head self-attention sublayer with residual. The key map has
/// no bias: softmax is invariant to it, so it would carry no gradient.
template <typename T>
struct AttentionSublayer
{
    LayerNorm<T> norm;
    Linear<T> q, k, v, o;
    int heads = 1;

    AttentionSublayer() = default;
    AttentionSublayer(ParamStore<T> &ps, const std::string &name, int d, int heads_, std::mt19937_64 &rng)
        : norm(ps, name + ".ln", d), q(ps, name + ".q", d, d, rng), k(ps, name + ".k", d, d, rng, false),
          v(ps, name + ".v", d, d, rng), o(ps, name + ".o", d, d, rng), heads(heads_)
    {
    }

    Var<T> operator()(Graph<T> &g, Var<T> x, const tc::AttentionGroups &groups) const
    {
        Var<T> h = norm(g, x);
        Var<T> a = tc::attention(q(g, h), k(g, h), v(g, h), groups, heads);
        return tc::add(x, o(g, a));
    }
};

template <typename T>
struct FeedForward
{
    LayerNorm<T> norm;
    Linear<T> up, down;

    FeedForward() = default;
    FeedForward(ParamStore<T> &ps, const std::string &name, int d, int mult, std::mt19937_64 &rng)
        : norm(ps, name + ".ln", d), up(ps, name + ".up", d, mult * d, rng), down(ps, name + ".down", mult * d, d, rng)
    {
    }

    Var<T> operator()(Graph<T> &g, Var<T> x) const { return tc::add(x, down(g, tc::gelu(up(g, norm(g, x))))); }
};

/// Two attention sublayers followed by one feed-forward. Factorized use:
/// the first attends across kept temporal patches at each position, the second
/// within each temporal slice. Joint use: both attend over all tokens.
template <typename T>
struct EncoderBlock
{
    AttentionSublayer<T> first, second;
    FeedForward<T> ffn;

    EncoderBlock() = default;
    EncoderBlock(ParamStore<T> &ps, const std::string &name, int d, int heads, int mult, std::mt19937_64 &rng)
        : first(ps, name + ".attn_t", d, heads, rng), second(ps, name + ".attn_sf", d, heads, rng),
          ffn(ps, name + ".ffn", d, mult, rng)
    {
    }

    Var<T> operator()(Graph<T> &g, Var<T> x, int rows, int cols, bool factorized) const
    {
        const auto joint = tc::AttentionGroups::joint(rows * cols);
        x = first(g, x, factorized ? tc::AttentionGroups::along_rows(rows, cols) : joint);
        x = second(g, x, factorized ? tc::AttentionGroups::within_rows(rows, cols) : joint);
        return ffn(g, x);
    }
};

/// Standard transformer layer over the full token sequence.
template <typename T>
struct DecoderLayer
{
    AttentionSublayer<T> attn;
    FeedForward<T> ffn;

    DecoderLayer() = default;
    DecoderLayer(ParamStore<T> &ps, const std::string &name, int d, int heads, int mult, std::mt19937_64 &rng)
        : attn(ps, name + ".attn", d, heads, rng), ffn(ps, name + ".ffn", d, mult, rng)
    {
    }

    Var<T> operator()(Graph<T> &g, Var<T> x) const
    {
        return ffn(g, attn(g, x, tc::AttentionGroups::joint(x.rows())));
    }
};

} // namespace pilotmae::model

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

#include "pilotmae/gridio/mask.hpp"
#include "pilotmae/gridio/patch.hpp"
#include "pilotmae/model/layers.hpp"

#include <memory>

namespace pilotmae::model {

enum class EncoderKind
{
    fst,
    jst
};

inline const char *to_string(EncoderKind k) { return k == EncoderKind::fst ? "fst" : "jst"; }

inline EncoderKind encoder_kind_from(const std::string &s)
{
    if (s == "fst")
        return EncoderKind::fst;
    if (s == "jst")
        return EncoderKind::jst;
    throw std::invalid_argument("unknown encoder kind '" + s + "' (expected fst or jst)");
}

/// Encoder blocks hold two attention sublayers and one feed-forward each. A
/// joint encoder uses the same blocks with all-to-all attention, so a 3-block
/// joint encoder has the six attention layers and the parameter count of a
/// 3-block factorized one.
struct ModelConfig
{
    grid::PatchConfig patch;
    int d = 128;
    EncoderKind encoder = EncoderKind::fst;
    int enc_blocks = 3;
    int enc_heads = 8;
    int dec_layers = 2;
    int dec_heads = 4;
    int ffn_mult = 4;
    double alpha_pe = 0.01;

    int attention_sublayers() const { return 2 * enc_blocks; }

    void validate() const
    {
        patch.validate();
        auto req = [](bool ok, const std::string &what) {
            if (!ok)
                throw std::invalid_argument("model: " + what);
        };
        req(d >= 3, "d must be >= 3");
        req(enc_blocks >= 1 && dec_layers >= 1, "depths must be >= 1");
        req(enc_heads >= 1 && d % enc_heads == 0, "d must be divisible by encoder heads");
        req(dec_heads >= 1 && d % dec_heads == 0, "d must be divisible by decoder heads");
        req(ffn_mult >= 1, "ffn_mult must be >= 1");
    }
};

// Closed-form parameter counts, kept independent of the module code so tests
// can compare the two.
inline std::size_t attention_sublayer_param_count(std::size_t d) { return 2 * d + 4 * d * d + 3 * d; }
inline std::size_t ffn_param_count(std::size_t d, std::size_t m) { return 2 * d + 2 * m * d * d + m * d + d; }
inline std::size_t encoder_param_count(const ModelConfig &c)
{
    const std::size_t d = static_cast<std::size_t>(c.d), Dp = static_cast<std::size_t>(c.patch.D_p());
    const std::size_t block = 2 * attention_sublayer_param_count(d) + ffn_param_count(d, static_cast<std::size_t>(c.ffn_mult));
    return Dp * d + d + 1 + static_cast<std::size_t>(c.enc_blocks) * block + 2 * d + 2 * d + 2;
}
inline std::size_t decoder_param_count(const ModelConfig &c)
{
    const std::size_t d = static_cast<std::size_t>(c.d), Dp = static_cast<std::size_t>(c.patch.D_p());
    const std::size_t layer = attention_sublayer_param_count(d) + ffn_param_count(d, static_cast<std::size_t>(c.ffn_mult));
    return d + 1 + static_cast<std::size_t>(c.dec_layers) * layer + 2 * d + d * Dp + Dp + 2 * d + 2;
}

template <typename T>
class Encoder
{
public:
    Encoder(ParamStore<T> &ps, const ModelConfig &cfg, std::mt19937_64 &rng, const std::string &prefix = "enc")
        : cfg_(cfg), pos_(grid::axial_pos_embed<T>(cfg.patch, cfg.d))
    {
        cfg.validate();
        embed_ = Linear<T>(ps, prefix + ".embed", cfg.patch.D_p(), cfg.d, rng);
        alpha_ = &ps.add(prefix + ".alpha_pe", Tensor<T>({1, 1}, static_cast<T>(cfg.alpha_pe)));
        for (int b = 0; b < cfg.enc_blocks; ++b)
            blocks_.emplace_back(ps, prefix + ".block" + std::to_string(b), cfg.d, cfg.enc_heads, cfg.ffn_mult, rng);
        norm_ = LayerNorm<T>(ps, prefix + ".ln_out", cfg.d);
        scale_head_ = Linear<T>(ps, prefix + ".scale_head", cfg.d, 2, rng);
    }

    const ModelConfig &config() const { return cfg_; }
    const Tensor<T> &pos_table() const { return pos_; }

    /// x_p = W patch + b + alpha * pos[p], using each token's flat index.
    Var<T> embed(Graph<T> &g, Var<T> patches, const std::vector<int> &flat_idx) const
    {
        if (patches.cols() != cfg_.patch.D_p())
            throw tc::ShapeError("embed: patch width " + std::to_string(patches.cols()) + " != D_p " +
                                 std::to_string(cfg_.patch.D_p()));
        if (static_cast<int>(flat_idx.size()) != patches.rows())
            throw tc::ShapeError("embed: one flat index per token required");
        Tensor<T> pos({static_cast<int>(flat_idx.size()), cfg_.d});
        for (std::size_t i = 0; i < flat_idx.size(); ++i)
            std::copy_n(pos_.row(flat_idx[i]), cfg_.d, pos.row(static_cast<int>(i)));
        return tc::add(embed_(g, patches), tc::scale_by(g.constant(std::move(pos)), g.param(*alpha_)));
    }

    /// Tokens laid out as a rows x cols grid (kept temporal patches x kept
    /// positions). Returns normalized token features, same layout.
    Var<T> encode_tokens(Graph<T> &g, Var<T> x, int rows, int cols) const
    {
        if (x.rows() != rows * cols)
            throw tc::ShapeError("encoder: token count " + std::to_string(x.rows()) + " is not " + std::to_string(rows) +
                                 "x" + std::to_string(cols));
        const bool factorized = cfg_.encoder == EncoderKind::fst;
        for (const auto &b : blocks_)
            x = b(g, x, rows, cols, factorized);
        return norm_(g, x);
    }

    Var<T> forward(Graph<T> &g, Var<T> patches, const grid::MaskSpec &mask) const
    {
        if (!mask.rectangular() && cfg_.encoder == EncoderKind::fst)
            throw std::invalid_argument("factorized encoder needs a rectangular keep set");
        return encode_tokens(g, embed(g, patches, mask.visible_indices()), mask.n_k(), mask.n_sf());
    }

    Var<T> scale(Graph<T> &g, Var<T> h) const { return scale_head_(g, h); }

    const std::vector<EncoderBlock<T>> &blocks() const { return blocks_; }

private:
    ModelConfig cfg_;
    Tensor<T> pos_;
    Linear<T> embed_;
    Parameter<T> *alpha_ = nullptr;
    std::vector<EncoderBlock<T>> blocks_;
    LayerNorm<T> norm_;
    Linear<T> scale_head_;
};

template <typename T>
class Decoder
{
public:
    Decoder(ParamStore<T> &ps, const ModelConfig &cfg, std::mt19937_64 &rng, const std::string &prefix = "dec")
        : cfg_(cfg), pos_(grid::axial_pos_embed<T>(cfg.patch, cfg.d))
    {
        cfg.validate();
        mask_token_ = &ps.add(prefix + ".mask_token", trunc_normal<T>({1, cfg.d}, kInitStd, rng));
        alpha_ = &ps.add(prefix + ".alpha_pe", Tensor<T>({1, 1}, static_cast<T>(cfg.alpha_pe)));
        for (int l = 0; l < cfg.dec_layers; ++l)
            layers_.emplace_back(ps, prefix + ".layer" + std::to_string(l), cfg.d, cfg.dec_heads, cfg.ffn_mult, rng);
        norm_ = LayerNorm<T>(ps, prefix + ".ln_out", cfg.d);
        recon_head_ = Linear<T>(ps, prefix + ".recon_head", cfg.d, cfg.patch.D_p(), rng);
        scale_head_ = Linear<T>(ps, prefix + ".scale_head", cfg.d, 2, rng);
    }

    const ModelConfig &config() const { return cfg_; }

    /// Full-length sequence: encoded tokens at their flat indices, the mask
    /// token elsewhere, positional rows at every position. Returns [P, d].
    Var<T> forward(Graph<T> &g, Var<T> encoded, const std::vector<int> &visible_idx) const
    {
        const int P = cfg_.patch.P();
        Var<T> x = tc::merge_rows(encoded, visible_idx, g.param(*mask_token_), P);
        x = tc::add(x, tc::scale_by(g.constant(pos_), g.param(*alpha_)));
        for (const auto &l : layers_)
            x = l(g, x);
        return norm_(g, x);
    }

    Var<T> recon(Graph<T> &g, Var<T> h) const { return recon_head_(g, h); }
    Var<T> scale(Graph<T> &g, Var<T> h) const { return scale_head_(g, h); }

    /// Readout parameters for the decoder-side scale head.
    std::vector<Parameter<T> *> scale_head_params() const { return {scale_head_.w, scale_head_.b}; }

private:
    ModelConfig cfg_;
    Tensor<T> pos_;
    Parameter<T> *mask_token_ = nullptr;
    Parameter<T> *alpha_ = nullptr;
    std::vector<DecoderLayer<T>> layers_;
    LayerNorm<T> norm_;
    Linear<T> recon_head_;
    Linear<T> scale_head_;
};

/// Encoder plus decoder with separate parameter stores, so a phase-2 decoder
/// can replace the first one while the encoder stays untouched.
template <typename T>
class MaskedAutoencoder
{
public:
    MaskedAutoencoder(const ModelConfig &cfg, std::uint64_t seed) : cfg_(cfg)
    {
        cfg.validate();
        std::mt19937_64 rng(seed);
        enc_store_ = std::make_unique<ParamStore<T>>();
        enc_ = std::make_unique<Encoder<T>>(*enc_store_, cfg, rng);
        dec_store_ = std::make_unique<ParamStore<T>>();
        dec_ = std::make_unique<Decoder<T>>(*dec_store_, cfg, rng);
    }

    /// Discards the decoder and attaches a freshly initialized one.
    void replace_decoder(int layers, int heads, std::uint64_t seed)
    {
        cfg_.dec_layers = layers;
        cfg_.dec_heads = heads;
        cfg_.validate();
        std::mt19937_64 rng(seed);
        dec_store_ = std::make_unique<ParamStore<T>>();
        dec_ = std::make_unique<Decoder<T>>(*dec_store_, cfg_, rng);
    }

    void set_encoder_trainable(bool on)
    {
        for (auto *p : enc_store_->all())
            p->trainable = on;
    }

    const ModelConfig &config() const { return cfg_; }
    Encoder<T> &encoder() { return *enc_; }
    const Encoder<T> &encoder() const { return *enc_; }
    Decoder<T> &decoder() { return *dec_; }
    const Decoder<T> &decoder() const { return *dec_; }
    ParamStore<T> &encoder_params() { return *enc_store_; }
    ParamStore<T> &decoder_params() { return *dec_store_; }

    std::vector<Parameter<T> *> all_params()
    {
        auto a = enc_store_->all();
        auto b = dec_store_->all();
        a.insert(a.end(), b.begin(), b.end());
        return a;
    }

    std::size_t param_count() const { return enc_store_->count() + dec_store_->count(); }
    std::size_t encoder_param_count() const { return enc_store_->count(); }

    double pref = 1.0;

private:
    ModelConfig cfg_;
    std::unique_ptr<ParamStore<T>> enc_store_, dec_store_;
    std::unique_ptr<Encoder<T>> enc_;
    std::unique_ptr<Decoder<T>> dec_;
};

/// Trainable-parameter count of the encoder plus decoder for a config.
inline std::size_t count_params(const ModelConfig &cfg)
{
    MaskedAutoencoder<float> m(cfg, 0);
    return m.param_count();
}

inline std::size_t count_encoder_params(const ModelConfig &cfg)
{
    MaskedAutoencoder<float> m(cfg, 0);
    return m.encoder_param_count();
}

} // namespace pilotmae::model

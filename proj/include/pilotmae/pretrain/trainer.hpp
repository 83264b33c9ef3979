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
#include "pilotmae/gridio/observe.hpp"
#include "pilotmae/model/checkpoint.hpp"
#include "pilotmae/pretrain/batch.hpp"
#include "pilotmae/pretrain/losses.hpp"
#include "pilotmae/tensorcore/optim.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>

namespace pilotmae::pre {

using chan::ChannelSample;
using model::MaskedAutoencoder;

enum class MaskMode
{
    structured, ///< n_k temporal patches x common kept positions
    scattered   ///< unstructured tokens at a fixed mask ratio (joint encoders only)
};

struct PhaseConfig
{
    int epochs = 500;
    int batch = 512;
    double lr_start = 5e-4;
    double lr_min = 5e-6;
    int warmup = 0;
    tc::AdamWConfig adamw{};
    double clip = 1.0;
    MaskMode mask_mode = MaskMode::structured;
    int n_k = 2;
    double rho_k = 0.1;
    double mask_ratio = 0.95;
};

/// Noise curriculum, scale heads, and encoder kind for the ablation matrix.
struct Ablation
{
    model::EncoderKind encoder = model::EncoderKind::fst;
    bool noise = true;
    bool scale = true;

    std::string name() const
    {
        if (encoder == model::EncoderKind::jst)
            return "jst";
        return std::string("fst") + (noise ? "+noise" : "") + (scale ? "+scale" : "");
    }

    static Ablation parse(const std::string &s)
    {
        if (s == "fst+noise+scale")
            return {model::EncoderKind::fst, true, true};
        if (s == "fst+noise")
            return {model::EncoderKind::fst, true, false};
        if (s == "fst+scale")
            return {model::EncoderKind::fst, false, true};
        if (s == "fst")
            return {model::EncoderKind::fst, false, false};
        if (s == "jst")
            return {model::EncoderKind::jst, false, false};
        throw std::invalid_argument("unknown ablation '" + s + "' (fst+noise+scale|fst+noise|fst+scale|fst|jst)");
    }
};

struct PretrainConfig
{
    PhaseConfig phase1{};
    PhaseConfig phase2{200, 512, 1e-4, 1e-6, 0, {}, 1.0, MaskMode::structured, 4, 0.75, 0.95};
    int phase2_dec_layers = 2;
    int phase2_dec_heads = 8;
    LossWeights weights{};
    Ablation ablation{};
    Curriculum curriculum{};
    double val_fraction = 0.1;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct DataSplit
{
    std::vector<std::size_t> train, val;
};

/// Seeded shuffle; the last round(frac * n) indices (at least one) validate.
inline DataSplit split_train_val(std::size_t n, double frac, std::uint64_t seed)
{
    if (n < 2)
        throw std::invalid_argument("need at least 2 samples to split train/validation");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(chan::stream_key(seed, 0, 0x73706c6974));
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t nv = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))), 1, n - 1);
    DataSplit s;
    s.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(nv));
    s.val.assign(idx.end() - static_cast<std::ptrdiff_t>(nv), idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    return s;
}

struct EpochLog
{
    int epoch = 0;
    double lr = 0, s_min = 0;
    double recon = 0, scale_enc = 0, scale_dec = 0;
    double val_loss = 0, val_recon = 0;
    double wall_seconds = 0;
};

struct TrainResult
{
    std::vector<EpochLog> log;
    double val_recon = 0;      ///< final masked recon loss on validation
    double val_zero_recon = 0; ///< same loss for an all-zero prediction
};

struct LossParts
{
    double recon = 0, scale_enc = 0, scale_dec = 0, total = 0;
};

inline grid::MaskSpec draw_mask(const grid::PatchConfig &pc, const PhaseConfig &ph, std::mt19937_64 &rng)
{
    return ph.mask_mode == MaskMode::structured ? grid::build_random_mask(pc, ph.n_k, ph.rho_k, rng)
                                                : grid::build_scattered_mask(pc, ph.mask_ratio, rng);
}

// RNG salts separating independent per-sample streams.
inline constexpr std::uint64_t kSaltTrain = 0x747261696e;
inline constexpr std::uint64_t kSaltVal = 0x76616c;

/// Phase-1 objective for one observed sample. Targets come from the clean patches.
template <typename T>
tc::Var<T> phase1_loss(tc::Graph<T> &g, MaskedAutoencoder<T> &m, const grid::Observation<T> &ob, const LossWeights &w,
                       bool use_scale, LossParts *parts = nullptr)
{
    const auto masked = ob.mask.masked_indices();
    if (masked.empty())
        throw std::invalid_argument("phase-1 loss needs at least one masked patch");
    const auto st = grid::patch_stats(ob.clean);
    auto enc = m.encoder().forward(g, g.constant(ob.visible), ob.mask);
    auto dec = m.decoder().forward(g, enc, ob.visible_idx);
    auto dec_masked = tc::gather_rows(dec, masked);
    auto l_recon = recon_loss(m.decoder().recon(g, dec_masked), grid::gather_patch_rows(st.z, masked));
    auto total = l_recon;
    LossParts lp;
    lp.recon = l_recon.value()[0];
    if (use_scale)
    {
        auto l_enc = scale_loss(m.encoder().scale(g, enc), grid::gather_patch_rows(st.scale, ob.visible_idx));
        auto l_dec = scale_loss(m.decoder().scale(g, dec_masked), grid::gather_patch_rows(st.scale, masked));
        total = tc::add(total, tc::add(tc::scale(l_enc, static_cast<T>(w.lambda_enc)), tc::scale(l_dec, static_cast<T>(w.lambda_dec))));
        lp.scale_enc = l_enc.value()[0];
        lp.scale_dec = l_dec.value()[0];
    }
    lp.total = total_loss(lp.recon, lp.scale_enc, lp.scale_dec, use_scale ? w : LossWeights{0, 0});
    if (parts)
        *parts = lp;
    return total;
}

/// Phase-2 objective: reconstruction only through the decoder body. The
/// decoder-side scale head is a readout on detached decoder features, so it
/// never shapes the decoder body. `features` and `scale_targets` receive the
/// masked rows that the trainer's least-squares readout fit consumes.
template <typename T>
std::pair<tc::Var<T>, tc::Var<T>> phase2_losses(tc::Graph<T> &g, MaskedAutoencoder<T> &m, const grid::Observation<T> &ob,
                                                LossParts *parts = nullptr, tc::Tensor<T> *features = nullptr,
                                                tc::Tensor<T> *scale_targets = nullptr)
{
    const auto masked = ob.mask.masked_indices();
    if (masked.empty())
        throw std::invalid_argument("phase-2 loss needs at least one masked patch");
    const auto st = grid::patch_stats(ob.clean);
    auto enc = m.encoder().forward(g, g.constant(ob.visible), ob.mask);
    auto dec = m.decoder().forward(g, enc, ob.visible_idx);
    auto dec_masked = tc::gather_rows(dec, masked);
    auto l_recon = recon_loss(m.decoder().recon(g, dec_masked), grid::gather_patch_rows(st.z, masked));
    auto targets = grid::gather_patch_rows(st.scale, masked);
    auto l_read = scale_loss(m.decoder().scale(g, tc::detach(dec_masked)), targets);
    if (features)
        *features = dec_masked.value();
    if (scale_targets)
        *scale_targets = std::move(targets);
    if (parts)
    {
        parts->recon = l_recon.value()[0];
        parts->scale_dec = l_read.value()[0];
        parts->total = parts->recon;
    }
    return {l_recon, l_read};
}

/// Mean of ||z||^2 over masked patches: the loss of predicting zeros.
template <typename T>
double zero_predictor_loss(const grid::Observation<T> &ob)
{
    const auto masked = ob.mask.masked_indices();
    const auto st = grid::patch_stats(ob.clean);
    double acc = 0;
    for (int p : masked)
        for (int j = 0; j < st.z.cols(); ++j)
            acc += static_cast<double>(st.z.at(p, j)) * st.z.at(p, j);
    return acc / static_cast<double>(masked.size());
}

namespace detail {

template <typename T>
grid::Observation<T> observe_for(const MaskedAutoencoder<T> &m, const ChannelSample &s, const PhaseConfig &ph,
                                 bool noise, const Curriculum &cur, int epoch, std::uint64_t seed, std::uint64_t salt,
                                 bool use_curriculum)
{
    auto rng = chan::stream_rng(seed, s.id, salt ^ (static_cast<std::uint64_t>(epoch) << 32));
    auto mask = draw_mask(m.config().patch, ph, rng);
    const double snr = (noise && use_curriculum) ? cur.sample(epoch, rng) : grid::kNoNoise;
    return grid::observe<T>(s, m.pref, m.config().patch, std::move(mask), snr, rng);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// Validation pass with masks (and noise) drawn from a fixed per-sample stream.
template <typename T>
LossParts validate_phase1(MaskedAutoencoder<T> &m, const std::vector<ChannelSample> &data,
                          const std::vector<std::size_t> &val, const PretrainConfig &cfg, int epoch, double *zero_loss = nullptr)
{
    LossParts acc;
    double zero = 0;
    std::vector<LossParts> parts(val.size());
    std::vector<double> zeros(val.size());
    tc::parallel_for(static_cast<int>(val.size()), cfg.threads, [&](int i) {
        const auto &s = data[val[static_cast<std::size_t>(i)]];
        auto ob = detail::observe_for(m, s, cfg.phase1, cfg.ablation.noise, cfg.curriculum, epoch, cfg.seed, kSaltVal, true);
        tc::Graph<T> g(false);
        phase1_loss(g, m, ob, cfg.weights, cfg.ablation.scale, &parts[static_cast<std::size_t>(i)]);
        zeros[static_cast<std::size_t>(i)] = zero_predictor_loss(ob);
    });
    for (std::size_t i = 0; i < val.size(); ++i)
    {
        acc.recon += parts[i].recon;
        acc.scale_enc += parts[i].scale_enc;
        acc.scale_dec += parts[i].scale_dec;
        acc.total += parts[i].total;
        zero += zeros[i];
    }
    const double n = static_cast<double>(val.size());
    acc.recon /= n, acc.scale_enc /= n, acc.scale_dec /= n, acc.total /= n;
    if (zero_loss)
        *zero_loss = zero / n;
    return acc;
}

template <typename T>
LossParts validate_phase2(MaskedAutoencoder<T> &m, const std::vector<ChannelSample> &data,
                          const std::vector<std::size_t> &val, const PretrainConfig &cfg, double *zero_loss = nullptr)
{
    std::vector<LossParts> parts(val.size());
    std::vector<double> zeros(val.size());
    tc::parallel_for(static_cast<int>(val.size()), cfg.threads, [&](int i) {
        const auto &s = data[val[static_cast<std::size_t>(i)]];
        auto ob = detail::observe_for(m, s, cfg.phase2, false, cfg.curriculum, 0, cfg.seed, kSaltVal + 2, false);
        tc::Graph<T> g(false);
        phase2_losses(g, m, ob, &parts[static_cast<std::size_t>(i)]);
        zeros[static_cast<std::size_t>(i)] = zero_predictor_loss(ob);
    });
    LossParts acc;
    double zero = 0;
    for (std::size_t i = 0; i < val.size(); ++i)
    {
        acc.recon += parts[i].recon;
        acc.scale_dec += parts[i].scale_dec;
        zero += zeros[i];
    }
    const double n = static_cast<double>(val.size());
    acc.recon /= n, acc.scale_dec /= n;
    acc.total = acc.recon;
    if (zero_loss)
        *zero_loss = zero / n;
    return acc;
}

class DivergenceError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochLog &)>;

/// Joint encoder + decoder pretraining. Sets m.pref from the training split.
/// On a non-finite loss, `on_diverge` (if set) gets a chance to dump state
/// before DivergenceError is thrown.
template <typename T>
TrainResult run_phase1(MaskedAutoencoder<T> &m, const std::vector<ChannelSample> &data, const DataSplit &split,
                       const PretrainConfig &cfg, const EpochCallback &on_epoch = {},
                       const std::function<void()> &on_diverge = {})
{
    if (split.train.empty())
        throw std::invalid_argument("phase 1: empty training split");
    const auto &ph = cfg.phase1;
    {
        double acc = 0;
        for (auto i : split.train)
            acc += data[i].mean_power();
        m.pref = acc / static_cast<double>(split.train.size());
        if (!(m.pref > 0))
            throw std::invalid_argument("phase 1: zero reference power");
    }
    m.set_encoder_trainable(true);
    auto params = m.all_params();
    BatchRunner<T> runner(params, cfg.threads);
    tc::AdamW<T> opt(params, ph.adamw);
    Curriculum cur = cfg.curriculum;
    cur.epochs = ph.epochs;

    TrainResult res;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = split.train;
    for (int e = 0; e < ph.epochs; ++e)
    {
        std::mt19937_64 shuffle_rng(chan::stream_key(cfg.seed, static_cast<std::uint64_t>(e), 0x6570));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = tc::warmup_cosine_lr(e, ph.epochs, ph.warmup, ph.lr_start, ph.lr_min);
        EpochLog row;
        row.epoch = e;
        row.lr = lr;
        row.s_min = cfg.ablation.noise ? cur.lower_bound(e) : std::numeric_limits<double>::infinity();
        std::vector<LossParts> parts(order.size());
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(ph.batch))
        {
            const std::size_t nb = std::min<std::size_t>(static_cast<std::size_t>(ph.batch), order.size() - b0);
            try
            {
                runner.run(static_cast<int>(nb), [&](tc::Graph<T> &g, int i) {
                    const auto &s = data[order[b0 + static_cast<std::size_t>(i)]];
                    auto ob = detail::observe_for(m, s, ph, cfg.ablation.noise, cur, e, cfg.seed, kSaltTrain, true);
                    return phase1_loss(g, m, ob, cfg.weights, cfg.ablation.scale, &parts[b0 + static_cast<std::size_t>(i)]);
                });
            }
            catch (const tc::NonFiniteError &err)
            {
                if (on_diverge)
                    on_diverge();
                throw DivergenceError("phase 1 diverged at epoch " + std::to_string(e) + ": " + err.what());
            }
            tc::clip_global_norm(params, ph.clip);
            opt.step(lr);
        }
        for (const auto &p : parts)
        {
            row.recon += p.recon;
            row.scale_enc += p.scale_enc;
            row.scale_dec += p.scale_dec;
        }
        row.recon /= static_cast<double>(parts.size());
        row.scale_enc /= static_cast<double>(parts.size());
        row.scale_dec /= static_cast<double>(parts.size());
        if (!split.val.empty())
        {
            const auto v = validate_phase1(m, data, split.val, cfg, e, &res.val_zero_recon);
            row.val_loss = v.total;
            row.val_recon = v.recon;
            res.val_recon = v.recon;
        }
        row.wall_seconds = detail::seconds_since(t0);
        res.log.push_back(row);
        if (on_epoch)
            on_epoch(row);
    }
    return res;
}

/// Least-squares fit of a linear readout y = x W + b, accumulated row block by
/// row block in double. This is the exact minimizer of the scale loss over
/// the head for fixed features, which a few hundred AdamW steps at the
/// phase-2 learning rate come nowhere near.
class ReadoutFit
{
public:
    explicit ReadoutFit(int in, int out) : in_(in), gram_(Eigen::MatrixXd::Zero(in + 1, in + 1)), cross_(Eigen::MatrixXd::Zero(in + 1, out)) {}

    template <typename T>
    void add(const tc::Tensor<T> &x, const tc::Tensor<T> &y)
    {
        Eigen::MatrixXd xa(x.rows(), in_ + 1);
        xa.leftCols(in_) = x.mat().template cast<double>();
        xa.col(in_).setOnes();
        gram_.noalias() += xa.transpose() * xa;
        cross_.noalias() += xa.transpose() * y.mat().template cast<double>();
        rows_ += x.rows();
    }

    std::size_t rows() const { return rows_; }

    /// Writes the solution into (w: in x out, b: 1 x out). A ridge term of
    /// 1e-8 times the mean feature energy keeps rank-deficient features solvable.
    template <typename T>
    void solve_into(tc::Parameter<T> &w, tc::Parameter<T> &b) const
    {
        if (rows_ == 0)
            throw std::logic_error("readout fit: no rows");
        Eigen::MatrixXd a = gram_;
        const double ridge = 1e-8 * std::max(1.0, gram_.diagonal().head(in_).mean());
        a.diagonal().head(in_).array() += ridge;
        const Eigen::MatrixXd sol = a.ldlt().solve(cross_);
        w.value.mat() = sol.topRows(in_).cast<T>();
        b.value.mat() = sol.row(in_).cast<T>();
    }

private:
    int in_;
    Eigen::MatrixXd gram_, cross_;
    std::size_t rows_ = 0;
};

/// Decoder-centric pretraining: encoder frozen, fresh decoder, reconstruction
/// only. The decoder scale head is refitted in closed form after every epoch
/// on that epoch's detached features.
template <typename T>
TrainResult run_phase2(MaskedAutoencoder<T> &m, const std::vector<ChannelSample> &data, const DataSplit &split,
                       const PretrainConfig &cfg, const EpochCallback &on_epoch = {},
                       const std::function<void()> &on_diverge = {})
{
    if (split.train.empty())
        throw std::invalid_argument("phase 2: empty training split");
    const auto &ph = cfg.phase2;
    m.replace_decoder(cfg.phase2_dec_layers, cfg.phase2_dec_heads, chan::stream_key(cfg.seed, 2, 0x646563));
    m.set_encoder_trainable(false);

    auto head = m.decoder().scale_head_params();
    std::vector<tc::Parameter<T> *> body;
    for (auto *p : m.decoder_params().all())
        if (std::find(head.begin(), head.end(), p) == head.end())
            body.push_back(p);
    BatchRunner<T> runner(body, cfg.threads);
    tc::AdamW<T> body_opt(body, ph.adamw);
    const int d = head[0]->value.rows();

    TrainResult res;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = split.train;
    for (int e = 0; e < ph.epochs; ++e)
    {
        std::mt19937_64 shuffle_rng(chan::stream_key(cfg.seed, static_cast<std::uint64_t>(e), 0x6571));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = tc::warmup_cosine_lr(e, ph.epochs, ph.warmup, ph.lr_start, ph.lr_min);
        EpochLog row;
        row.epoch = e;
        row.lr = lr;
        row.s_min = std::numeric_limits<double>::infinity();
        std::vector<LossParts> parts(order.size());
        ReadoutFit fit(d, 2);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(ph.batch))
        {
            const std::size_t nb = std::min<std::size_t>(static_cast<std::size_t>(ph.batch), order.size() - b0);
            // Only recon drives the body. The detached features and scale
            // targets are kept per sample and folded into the readout fit in
            // sample order, so the fit does not depend on the thread count.
            std::vector<tc::Tensor<T>> feats(nb), targets(nb);
            auto step = [&](tc::Graph<T> &g, int i) {
                const auto &s = data[order[b0 + static_cast<std::size_t>(i)]];
                auto ob = detail::observe_for(m, s, ph, false, cfg.curriculum, e, cfg.seed, kSaltTrain + 2, false);
                const auto k = static_cast<std::size_t>(i);
                return phase2_losses(g, m, ob, &parts[b0 + k], &feats[k], &targets[k]).first;
            };
            try
            {
                runner.run(static_cast<int>(nb), step);
            }
            catch (const tc::NonFiniteError &err)
            {
                if (on_diverge)
                    on_diverge();
                throw DivergenceError("phase 2 diverged at epoch " + std::to_string(e) + ": " + err.what());
            }
            tc::clip_global_norm(body, ph.clip);
            body_opt.step(lr);
            for (std::size_t k = 0; k < nb; ++k)
                fit.add(feats[k], targets[k]);
        }
        fit.solve_into(*head[0], *head[1]);
        for (const auto &p : parts)
        {
            row.recon += p.recon;
            row.scale_dec += p.scale_dec;
        }
        row.recon /= static_cast<double>(parts.size());
        row.scale_dec /= static_cast<double>(parts.size());
        if (!split.val.empty())
        {
            const auto v = validate_phase2(m, data, split.val, cfg, &res.val_zero_recon);
            row.val_loss = v.recon;
            row.val_recon = v.recon;
            res.val_recon = v.recon;
        }
        row.wall_seconds = detail::seconds_since(t0);
        res.log.push_back(row);
        if (on_epoch)
            on_epoch(row);
    }
    return res;
}

inline void write_log_csv(const std::string &path, const std::vector<EpochLog> &log, const std::string &config_hash,
                          std::uint64_t seed)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    os << "epoch,lr,s_min,L_recon,L_scale_enc,L_scale_dec,val_loss,wall_seconds,config_hash,seed\n";
    os << std::setprecision(9);
    for (const auto &r : log)
        os << r.epoch << ',' << r.lr << ',' << r.s_min << ',' << r.recon << ',' << r.scale_enc << ',' << r.scale_dec << ','
           << r.val_loss << ',' << r.wall_seconds << ',' << config_hash << ',' << seed << '\n';
}

} // namespace pilotmae::pre

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

#include "pilotmae/pretrain/batch.hpp"
#include "pilotmae/tasks/estimate.hpp"
#include "pilotmae/tasks/features.hpp"
#include "pilotmae/tensorcore/optim.hpp"

#include <functional>

namespace pilotmae::tasks {

enum class SupervisedTask
{
    beam,
    los,
    ce
};

inline SupervisedTask supervised_task_from(const std::string &s)
{
    if (s == "beam")
        return SupervisedTask::beam;
    if (s == "los")
        return SupervisedTask::los;
    if (s == "ce")
        return SupervisedTask::ce;
    throw std::invalid_argument("unknown task '" + s + "' (expected beam, los or ce)");
}

struct SupervisedConfig
{
    int epochs = 200;
    int batch = 256;
    double lr_start = 5e-4;
    double lr_min = 5e-6;
    int warmup = 10;
    tc::AdamWConfig adamw{0.9, 0.999, 1e-8, 0.05};
    double clip = 1.0;
    double snr_lo = 0, snr_hi = 30; ///< training SNR range for ce inputs
    std::uint64_t seed = 1;
    int threads = 1;
};

/// Encoder plus a linear head over mean-pooled tokens (beam: d x M, LoS: d x 2).
/// Trained on clean full-grid inputs.
template <typename T>
struct SupervisedClassifier
{
    model::ModelConfig cfg;
    int classes = 0;
    double pref = 1.0;
    std::unique_ptr<model::ParamStore<T>> store = std::make_unique<model::ParamStore<T>>();
    std::unique_ptr<model::Encoder<T>> enc;
    model::Linear<T> head;

    SupervisedClassifier(const model::ModelConfig &c, int num_classes, std::uint64_t seed) : cfg(c), classes(num_classes)
    {
        if (num_classes < 2)
            throw std::invalid_argument("classifier needs at least two classes");
        std::mt19937_64 rng(seed);
        enc = std::make_unique<model::Encoder<T>>(*store, cfg, rng, "sup.enc");
        head = model::Linear<T>(*store, "sup.head", cfg.d, num_classes, rng);
    }

    tc::Var<T> logits(tc::Graph<T> &g, const grid::Observation<T> &ob) const
    {
        auto h = enc->forward(g, g.constant(ob.visible), ob.mask);
        return head(g, tc::mean_rows(h));
    }
};

/// Encoder (factorized or joint) plus a joint decoder mapping the zero-filled
/// pilot grid to every patch, trained on raw MSE against the full channel.
template <typename T>
struct SupervisedEstimator
{
    model::ModelConfig cfg;
    double pref = 1.0;
    grid::PilotPattern pattern;
    std::unique_ptr<model::ParamStore<T>> store = std::make_unique<model::ParamStore<T>>();
    std::unique_ptr<model::Encoder<T>> enc;
    std::unique_ptr<model::Decoder<T>> dec;

    SupervisedEstimator(const model::ModelConfig &c, const grid::PilotPattern &p, std::uint64_t seed) : cfg(c), pattern(p)
    {
        std::mt19937_64 rng(seed);
        enc = std::make_unique<model::Encoder<T>>(*store, cfg, rng, "sup.enc");
        dec = std::make_unique<model::Decoder<T>>(*store, cfg, rng, "sup.dec");
    }

    /// Zero-filled grid in patch form: observed pilot values, zeros elsewhere.
    tc::Tensor<T> input_patches(const PilotObservation<T> &po) const
    {
        std::vector<cfloat> Yf(po.Y.size());
        for (std::size_t i = 0; i < Yf.size(); ++i)
            Yf[i] = cfloat(static_cast<float>(po.Y[i].real()), static_cast<float>(po.Y[i].imag()));
        return grid::patchify<T>(Yf, cfg.patch);
    }

    tc::Var<T> predict(tc::Graph<T> &g, const PilotObservation<T> &po) const
    {
        const auto full = grid::MaskSpec::full(cfg.patch);
        auto h = enc->forward(g, g.constant(input_patches(po)), full);
        return dec->recon(g, dec->forward(g, h, full.visible_indices()));
    }

    EstimatorOutput estimate(const PilotObservation<T> &po, const std::string &tag) const
    {
        tc::Graph<T> g(false);
        const auto Hn = grid::unpatchify(predict(g, po).value(), cfg.patch);
        std::vector<cdouble> Hd(Hn.begin(), Hn.end());
        return {tag, po.obs.snr_db, detail::to_physical(Hd, pref)};
    }
};

struct SupervisedLog
{
    int epoch = 0;
    double lr = 0, loss = 0, wall_seconds = 0;
};

namespace detail {

template <typename T, typename LossFn>
std::vector<SupervisedLog> train_loop(std::vector<tc::Parameter<T> *> params, std::size_t n, const SupervisedConfig &cfg,
                                      LossFn &&loss_fn, const std::function<void(const SupervisedLog &)> &on_epoch)
{
    pre::BatchRunner<T> runner(params, cfg.threads);
    tc::AdamW<T> opt(params, cfg.adamw);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<SupervisedLog> log;
    const auto t0 = std::chrono::steady_clock::now();
    for (int e = 0; e < cfg.epochs; ++e)
    {
        std::mt19937_64 rng(chan::stream_key(cfg.seed, static_cast<std::uint64_t>(e), 0x737570));
        std::shuffle(order.begin(), order.end(), rng);
        SupervisedLog row;
        row.epoch = e;
        row.lr = tc::warmup_cosine_lr(e, cfg.epochs, cfg.warmup, cfg.lr_start, cfg.lr_min);
        std::vector<double> losses(n);
        for (std::size_t b0 = 0; b0 < n; b0 += static_cast<std::size_t>(cfg.batch))
        {
            const std::size_t nb = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), n - b0);
            runner.run(static_cast<int>(nb), [&](tc::Graph<T> &g, int i) {
                const std::size_t k = order[b0 + static_cast<std::size_t>(i)];
                auto l = loss_fn(g, k, e);
                losses[b0 + static_cast<std::size_t>(i)] = l.value()[0];
                return l;
            });
            tc::clip_global_norm(params, cfg.clip);
            opt.step(row.lr);
        }
        for (double l : losses)
            row.loss += l;
        row.loss /= static_cast<double>(n);
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.push_back(row);
        if (on_epoch)
            on_epoch(row);
    }
    return log;
}

} // namespace detail

/// Cross-entropy training on clean full-grid inputs.
template <typename T>
std::vector<SupervisedLog> train_classifier(SupervisedClassifier<T> &clf, const std::vector<chan::ChannelSample> &samples,
                                            const std::vector<int> &labels, const SupervisedConfig &cfg,
                                            const std::function<void(const SupervisedLog &)> &on_epoch = {})
{
    if (labels.size() != samples.size() || samples.empty())
        throw std::invalid_argument("train_classifier: one label per sample required");
    for (int y : labels)
        if (y < 0 || y >= clf.classes)
            throw std::invalid_argument("train_classifier: label " + std::to_string(y) + " outside the head's " +
                                        std::to_string(clf.classes) + " classes");
    clf.pref = grid::compute_pref(samples);
    const auto full = grid::MaskSpec::full(clf.cfg.patch);
    return detail::train_loop<T>(
        clf.store->all(), samples.size(), cfg,
        [&](tc::Graph<T> &g, std::size_t k, int) {
            std::mt19937_64 unused(0);
            const auto ob = grid::observe<T>(samples[k], clf.pref, clf.cfg.patch, full, grid::kNoNoise, unused);
            return tc::cross_entropy(clf.logits(g, ob), {labels[k]});
        },
        on_epoch);
}

/// Raw-MSE training on zero-filled pilot grids; a fresh SNR ~ U[snr_lo, snr_hi]
/// per sample and epoch.
template <typename T>
std::vector<SupervisedLog> train_estimator(SupervisedEstimator<T> &est, const std::vector<chan::ChannelSample> &samples,
                                           const SupervisedConfig &cfg,
                                           const std::function<void(const SupervisedLog &)> &on_epoch = {})
{
    if (samples.empty())
        throw std::invalid_argument("train_estimator: no samples");
    est.pref = grid::compute_pref(samples);
    return detail::train_loop<T>(
        est.store->all(), samples.size(), cfg,
        [&](tc::Graph<T> &g, std::size_t k, int e) {
            const auto &s = samples[k];
            auto rng = chan::stream_rng(cfg.seed, s.id, 0x6365 ^ (static_cast<std::uint64_t>(e) << 32));
            const double snr = std::uniform_real_distribution<double>(cfg.snr_lo, cfg.snr_hi)(rng);
            const auto po = observe_pilots<T>(s, est.pref, est.cfg.patch, est.pattern, snr, rng);
            return tc::row_sq_error_mean(est.predict(g, po), po.obs.clean);
        },
        on_epoch);
}

} // namespace pilotmae::tasks

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

#include "pilotmae/channelgen.hpp"
#include "pilotmae/cli/config.hpp"
#include "pilotmae/cli/plot.hpp"
#include "pilotmae/profiler.hpp"
#include "pilotmae/tasks.hpp"
#include "pilotmae/tensorcore/gradcheck.hpp"

#include <filesystem>
#include <iostream>

namespace pilotmae::cli {

namespace fs = std::filesystem;
using chan::ChannelSample;
using Model = model::MaskedAutoencoder<float>;

inline void ensure_dir(const std::string &dir)
{
    if (!dir.empty())
        fs::create_directories(dir);
}

inline json manifest_extra(const RunConfig &c) { return {{"config_hash", config_hash(c)}, {"seed", c.seed}}; }

// ---------------------------------------------------------------------- gen

inline chan::ScenarioConfig scenario_of(const RunConfig &c)
{
    chan::ScenarioConfig s = c.scenario;
    s.seed = c.seed;
    return s;
}

/// Writes <out>/shard.pwch and <out>/manifest.json.
inline void cmd_gen(const RunConfig &c, const std::string &out, std::size_t count, std::uint64_t first_id)
{
    validate(c);
    ensure_dir(out);
    const auto data = chan::generate_dataset(scenario_of(c), count, first_id, c.threads);
    chan::write_shard(data, (fs::path(out) / "shard.pwch").string());
    chan::write_manifest((fs::path(out) / "manifest.json").string(), to_json(c), c.seed, count, config_hash(c),
                         {{"first_id", first_id}});
}

inline std::vector<ChannelSample> load_data(const RunConfig &c, const std::string &path)
{
    return chan::read_shard(path, scenario_of(c));
}

// ----------------------------------------------------------------- pretrain

inline void print_epoch(const char *phase, const pre::EpochLog &l)
{
    std::cout << phase << " epoch " << l.epoch << " lr " << l.lr << " recon " << l.recon << " scale_enc " << l.scale_enc
              << " scale_dec " << l.scale_dec << " val " << l.val_loss << " t " << l.wall_seconds << "s" << std::endl;
}

inline json checkpoint_meta(const RunConfig &c, int phase)
{
    return {{"phase", phase},
            {"ablation", c.pretrain.ablation.name()},
            {"config_hash", config_hash(c)},
            {"seed", c.seed},
            {"config", to_json(c)}};
}

struct PretrainOutcome
{
    std::unique_ptr<Model> model;
    pre::TrainResult result;
};

inline PretrainOutcome pretrain_phase1(const RunConfig &c, const std::vector<ChannelSample> &data, bool verbose = false)
{
    validate(c);
    const auto pc = effective_pretrain(c);
    PretrainOutcome out;
    out.model = std::make_unique<Model>(effective_model(c), chan::stream_key(c.seed, 1, 0x696e6974));
    const auto split = pre::split_train_val(data.size(), pc.val_fraction, c.seed);
    pre::EpochCallback cb;
    if (verbose)
        cb = [](const pre::EpochLog &l) { print_epoch("phase1", l); };
    out.result = pre::run_phase1(*out.model, data, split, pc, cb);
    return out;
}

inline pre::TrainResult pretrain_phase2(const RunConfig &c, Model &m, const std::vector<ChannelSample> &data,
                                        bool verbose = false)
{
    validate(c);
    const auto pc = effective_pretrain(c);
    const auto split = pre::split_train_val(data.size(), pc.val_fraction, c.seed);
    pre::EpochCallback cb;
    if (verbose)
        cb = [](const pre::EpochLog &l) { print_epoch("phase2", l); };
    return pre::run_phase2(m, data, split, pc, cb);
}

/// Phase 1 writes a fresh checkpoint; phase 2 loads `encoder_ckpt` and
/// retrains the decoder. Output: <out>/checkpoint.pwck and <out>/log.csv.
inline void cmd_pretrain(const RunConfig &c, int phase, const std::string &data_path, const std::string &encoder_ckpt,
                         const std::string &out)
{
    if (phase != 1 && phase != 2)
        throw ConfigError("--phase must be 1 or 2");
    if (phase == 2 && (encoder_ckpt.empty() || !fs::exists(encoder_ckpt)))
        throw ConfigError("missing encoder checkpoint" + (encoder_ckpt.empty() ? std::string() : ": " + encoder_ckpt));
    validate(c);
    const auto data = load_data(c, data_path);
    ensure_dir(out);
    const std::string ckpt = (fs::path(out) / "checkpoint.pwck").string();
    const std::string dump = (fs::path(out) / "diverged.pwck").string();
    pre::TrainResult res;
    std::unique_ptr<Model> m;
    if (phase == 1)
    {
        auto o = pretrain_phase1(c, data, true);
        m = std::move(o.model);
        res = std::move(o.result);
    }
    else
    {
        m = model::load_checkpoint<float>(encoder_ckpt);
        const auto pc = effective_pretrain(c);
        const auto split = pre::split_train_val(data.size(), pc.val_fraction, c.seed);
        res = pre::run_phase2(*m, data, split, pc, [](const pre::EpochLog &l) { print_epoch("phase2", l); },
                              [&] { model::save_checkpoint(*m, dump, checkpoint_meta(c, phase)); });
    }
    model::save_checkpoint(*m, ckpt, checkpoint_meta(c, phase));
    pre::write_log_csv((fs::path(out) / "log.csv").string(), res.log, config_hash(c), c.seed);
    std::cout << "val recon " << res.val_recon << " (zero predictor " << res.val_zero_recon << ")" << std::endl;
}

// --------------------------------------------------------------------- eval

/// Beam labels from each sample's scene; with a label carrier set, the scene
/// is re-synthesized at that carrier first.
inline std::vector<int> beam_labels(const RunConfig &c, const std::vector<ChannelSample> &samples, const tasks::Codebook &cb)
{
    std::vector<int> out(samples.size());
    auto sc = scenario_of(c);
    auto sc2 = sc;
    if (c.tasks.label_carrier > 0)
        sc2.carrier = c.tasks.label_carrier;
    tc::parallel_for(static_cast<int>(samples.size()), c.threads, [&](int i) {
        const auto &s = samples[static_cast<std::size_t>(i)];
        if (c.tasks.label_carrier > 0)
            out[static_cast<std::size_t>(i)] = tasks::beam_label(chan::synthesize_channel(chan::scene_for(sc, s.id), sc2, s.id), cb);
        else
            out[static_cast<std::size_t>(i)] = tasks::beam_label(s, cb);
    });
    return out;
}

inline std::vector<int> los_labels(const std::vector<ChannelSample> &samples)
{
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto &s : samples)
        out.push_back(s.los ? 1 : 0);
    return out;
}

/// kNN sweep over SNR and input mode for one frozen encoder.
inline std::vector<tasks::ResultRow> eval_knn(const RunConfig &c, const std::string &task, const std::string &method,
                                              const model::Encoder<float> &enc, double pref,
                                              const std::vector<ChannelSample> &samples, const std::vector<int> &labels,
                                              int classes, int top_n)
{
    std::vector<tasks::ResultRow> rows;
    for (const auto &mode_s : c.tasks.modes)
    {
        const auto mode = tasks::input_mode_from(mode_s);
        for (double snr : c.tasks.snrs)
        {
            const auto fs_ = tasks::extract_features(enc, pref, samples, labels, mode, snr, c.seed, c.threads);
            const auto r = tasks::knn_eval(fs_, classes, {c.tasks.knn_k, c.tasks.knn_folds, top_n, c.seed}, c.threads);
            if (r.degenerate_folds > 0)
                std::cerr << "warning: " << r.degenerate_folds << " single-class folds (" << task << ", " << mode_s
                          << ", " << snr << " dB)\n";
            rows.push_back({task, method, mode_s, snr, "top" + std::to_string(top_n) + "_accuracy", r.accuracy.mean,
                            r.accuracy.std, r.accuracy.n});
        }
    }
    return rows;
}

inline std::vector<tasks::ResultRow> eval_beam(const RunConfig &c, const Model &m, const std::string &method,
                                               const std::vector<ChannelSample> &samples)
{
    const auto cb = make_codebook(c);
    return eval_knn(c, "beam", method, m.encoder(), m.pref, samples, beam_labels(c, samples, cb), cb.M(), c.tasks.beam_top_n);
}

inline std::vector<tasks::ResultRow> eval_los(const RunConfig &c, const Model &m, const std::string &method,
                                              const std::vector<ChannelSample> &samples)
{
    return eval_knn(c, "los", method, m.encoder(), m.pref, samples, los_labels(samples), 2, c.tasks.los_top_n);
}

/// Supervised classifier baseline for beam or LoS, scored with the same kNN
/// readout on its mean-pooled encoder features.
inline std::vector<tasks::ResultRow> eval_supervised_classifier(const RunConfig &c, const std::string &task,
                                                                const std::vector<ChannelSample> &train,
                                                                const std::vector<ChannelSample> &samples)
{
    auto mc = c.model;
    mc.encoder = model::EncoderKind::fst;
    const bool beam = task == "beam";
    const auto cb = make_codebook(c);
    const int classes = beam ? cb.M() : 2;
    tasks::SupervisedClassifier<float> clf(mc, classes, chan::stream_key(c.seed, 3, 0x73757063));
    auto sc = beam ? c.tasks.sup_beam : c.tasks.sup_los;
    sc.seed = c.seed;
    sc.threads = c.threads;
    tasks::train_classifier(clf, train, beam ? beam_labels(c, train, cb) : los_labels(train), sc);
    const auto labels = beam ? beam_labels(c, samples, cb) : los_labels(samples);
    return eval_knn(c, task, "supervised", *clf.enc, clf.pref, samples, labels, classes,
                    beam ? c.tasks.beam_top_n : c.tasks.los_top_n);
}

inline constexpr std::uint64_t kSaltCe = 0x6365766c;

/// Channel-estimation sweep: every method sees the same pilot observation per
/// (sample, SNR). NMSE is the per-sample mean mapped to dB; std is over
/// per-sample dB values.
inline std::vector<tasks::ResultRow> eval_ce(const RunConfig &c, const Model *m, const std::vector<ChannelSample> &train,
                                             const std::vector<ChannelSample> &samples)
{
    const auto &methods = c.tasks.ce_methods;
    auto has = [&](const char *k) { return std::find(methods.begin(), methods.end(), k) != methods.end(); };
    for (const auto &k : methods)
        if (k != "decoder" && k != "linear" && k != "lmmse-practical" && k != "lmmse-gold" && k != "supervised-fst" &&
            k != "supervised-jst")
            throw ConfigError("unknown ce method '" + k + "'");
    if (has("decoder") && !m)
        throw ConfigError("ce method 'decoder' needs a checkpoint");
    const auto pattern = grid::PilotPattern::standard();
    const auto &pc = c.model.patch;
    const double pref = m ? m->pref : grid::compute_pref(train);

    tasks::KroneckerStats practical, gold;
    if (has("lmmse-practical"))
    {
        std::vector<ChannelSample> sub(train.begin(), train.begin() + std::min<std::ptrdiff_t>(
                                                                          static_cast<std::ptrdiff_t>(train.size()),
                                                                          c.tasks.stats_samples));
        practical = tasks::estimate_kronecker_stats(sub);
    }
    if (has("lmmse-gold"))
        gold = tasks::estimate_kronecker_stats(samples);

    std::map<std::string, std::unique_ptr<tasks::SupervisedEstimator<float>>> sup;
    for (auto kind : {model::EncoderKind::fst, model::EncoderKind::jst})
    {
        const std::string name = std::string("supervised-") + model::to_string(kind);
        if (!has(name.c_str()))
            continue;
        auto mc = c.model;
        mc.encoder = kind;
        mc.dec_layers = c.tasks.sup_ce_dec_layers;
        mc.dec_heads = c.tasks.sup_ce_dec_heads;
        auto est = std::make_unique<tasks::SupervisedEstimator<float>>(mc, pattern, chan::stream_key(c.seed, 4, 0x636573));
        auto sc = c.tasks.sup_ce;
        sc.seed = c.seed;
        sc.threads = c.threads;
        tasks::train_estimator(*est, train, sc,
                               [&](const tasks::SupervisedLog &l) {
                                   std::cout << name << " epoch " << l.epoch << " loss " << l.loss << std::endl;
                               });
        sup[name] = std::move(est);
    }

    std::vector<tasks::ResultRow> rows;
    for (double snr : c.tasks.snrs)
    {
        std::map<std::string, std::vector<double>> lin;
        for (const auto &k : methods)
            lin[k].assign(samples.size(), 0.0);
        tc::parallel_for(static_cast<int>(samples.size()), c.threads, [&](int i) {
            const auto &s = samples[static_cast<std::size_t>(i)];
            auto rng = chan::stream_rng(c.seed, s.id, kSaltCe ^ (static_cast<std::uint64_t>(std::llround(snr * 1000)) << 24));
            const auto po = tasks::observe_pilots<float>(s, pref, pc, pattern, snr, rng);
            for (const auto &k : methods)
            {
                tasks::EstimatorOutput e;
                if (k == "decoder")
                    e = tasks::estimate_decoder(*m, po);
                else if (k == "linear")
                    e = tasks::estimate_linear(po, pref);
                else if (k == "lmmse-practical")
                    e = tasks::estimate_lmmse(po, pref, practical, k);
                else if (k == "lmmse-gold")
                    e = tasks::estimate_lmmse(po, pref, gold, k);
                else
                    e = sup.at(k)->estimate(po, k);
                lin[k][static_cast<std::size_t>(i)] = tasks::nmse_linear(e.H, s.H);
            }
        });
        for (const auto &k : methods)
        {
            std::vector<double> db;
            for (double v : lin[k])
                db.push_back(tasks::to_db_floored(v));
            const auto ms = tasks::mean_std(db);
            rows.push_back({"ce", k, "pilot", snr, "nmse_db", tasks::nmse_db(lin[k]), ms.std, ms.n});
        }
    }
    return rows;
}

// ------------------------------------------------------------------ profile

/// FST/JST x pilot/full latency table. Without a checkpoint, both encoders are
/// freshly initialized at the configured size (latency does not depend on weights).
inline std::vector<prof::CostReport> profile_encoders(const RunConfig &c, const Model *trained,
                                                      const std::vector<ChannelSample> &samples)
{
    if (samples.empty())
        throw ConfigError("profile needs at least one sample");
    prof::LatencyConfig lc{c.profile.batch, c.profile.repeats, c.profile.warmup};
    std::vector<prof::CostReport> out;
    for (auto kind : {model::EncoderKind::fst, model::EncoderKind::jst})
    {
        auto mc = trained ? trained->config() : c.model;
        mc.encoder = kind;
        std::unique_ptr<Model> fresh;
        const Model *m = trained;
        if (!trained || trained->config().encoder != kind)
        {
            fresh = std::make_unique<Model>(mc, c.seed);
            fresh->pref = trained ? trained->pref : grid::compute_pref(samples);
            m = fresh.get();
        }
        for (auto mode : {tasks::InputMode::pilot, tasks::InputMode::full})
        {
            const auto mask = tasks::mode_mask(mc.patch, mode);
            std::vector<grid::Observation<float>> batch;
            for (int i = 0; i < lc.batch; ++i)
            {
                const auto &s = samples[static_cast<std::size_t>(i) % samples.size()];
                auto rng = chan::stream_rng(c.seed, s.id, 0x70726f66);
                batch.push_back(grid::observe<float>(s, m->pref, mc.patch, mask, 20.0, rng));
            }
            auto r = prof::measure_latency(m->encoder(), batch, lc, tasks::to_string(mode));
            r.params = m->encoder_param_count();
            out.push_back(r);
        }
    }
    return out;
}

// ---------------------------------------------------------------- gradcheck

/// Finite-difference check of the full phase-1 loss (scale terms on) for a
/// toy double-precision model.
inline tc::GradCheckResult phase1_gradcheck(model::EncoderKind kind = model::EncoderKind::fst, std::uint64_t seed = 3)
{
    chan::ScenarioConfig sc;
    sc.T = 2;
    sc.N_h = 2;
    sc.N_v = 2;
    sc.F = 4;
    sc.seed = seed;
    model::ModelConfig mc;
    mc.patch = {2, 4, 4, 1, 2, 2};
    mc.d = 16;
    mc.encoder = kind;
    mc.enc_blocks = 1;
    mc.enc_heads = 2;
    mc.dec_layers = 1;
    mc.dec_heads = 2;
    mc.ffn_mult = 2;
    mc.alpha_pe = 0.5;
    model::MaskedAutoencoder<double> m(mc, seed);
    const auto s = chan::generate_sample(sc, 0);
    m.pref = s.mean_power();
    std::mt19937_64 rng(seed);
    pre::PhaseConfig ph;
    ph.n_k = 2;
    ph.rho_k = 0.5;
    if (kind == model::EncoderKind::jst)
    {
        ph.mask_mode = pre::MaskMode::scattered;
        ph.mask_ratio = 0.5;
    }
    auto mask = pre::draw_mask(mc.patch, ph, rng);
    const auto ob = grid::observe<double>(s, m.pref, mc.patch, mask, 10.0, rng);
    return tc::grad_check([&](tc::Graph<double> &g) { return pre::phase1_loss(g, m, ob, {0.05, 0.05}, true); },
                          m.all_params());
}

} // namespace pilotmae::cli

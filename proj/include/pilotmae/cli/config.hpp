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
#include "pilotmae/model/checkpoint.hpp"
#include "pilotmae/pretrain/trainer.hpp"
#include "pilotmae/tasks/codebook.hpp"
#include "pilotmae/tasks/supervised.hpp"

#include <cstdio>

namespace pilotmae::cli {

using nlohmann::json;
using model::read_opt;
using model::reject_unknown_keys;

/// Input errors that map to exit code 2.
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

struct CodebookConfig
{
    std::string h_branch = "over", v_branch = "over";
    int h_factor = 2, v_factor = 2;
};

struct TasksConfig
{
    int eval_samples = 1000;
    std::uint64_t eval_first_id = 1000000; ///< keeps evaluation ids disjoint from pretraining ids
    int stats_samples = 1000;              ///< practical LMMSE statistics, drawn from the pretraining id range
    double label_carrier = 0;              ///< 0: beam labels at the scenario carrier
    CodebookConfig codebook{};
    int knn_k = 20, knn_folds = 10, beam_top_n = 3, los_top_n = 1;
    std::vector<double> snrs{0, 5, 10, 15, 20, 25, 30};
    std::vector<std::string> modes{"pilot", "full"};
    std::vector<std::string> ce_methods{"decoder", "linear", "lmmse-practical", "lmmse-gold", "supervised-fst",
                                        "supervised-jst"};
    tasks::SupervisedConfig sup_beam{200, 256, 5e-4, 5e-6, 10, {0.9, 0.999, 1e-8, 0.05}, 1.0, 0, 30, 1, 1};
    tasks::SupervisedConfig sup_los{200, 256, 5e-4, 5e-6, 10, {0.9, 0.999, 1e-8, 0.005}, 1.0, 0, 30, 1, 1};
    tasks::SupervisedConfig sup_ce{200, 256, 5e-4, 5e-6, 10, {0.9, 0.999, 1e-8, 0.005}, 1.0, 0, 30, 1, 1};
    int sup_ce_dec_layers = 2, sup_ce_dec_heads = 8;
};

struct ProfileConfig
{
    int batch = 32, repeats = 100, warmup = 5;
    std::string lockfile = "/tmp/pilotmae-profile.lock";
};

struct RunConfig
{
    std::string preset = "paper";
    std::uint64_t seed = 1;
    int threads = 1;
    int samples = 10000; ///< pretraining dataset size for `gen`
    chan::ScenarioConfig scenario{};
    model::ModelConfig model{};
    pre::PretrainConfig pretrain{};
    pre::PhaseConfig jst_phase1{500, 512, 1e-3, 1e-5, 10, {}, 1.0, pre::MaskMode::scattered, 2, 0.1, 0.95};
    TasksConfig tasks{};
    ProfileConfig profile{};

    grid::PatchConfig &patch() { return model.patch; }
    const grid::PatchConfig &patch() const { return model.patch; }
};

// ------------------------------------------------------------------ presets

inline RunConfig paper_preset()
{
    RunConfig c;
    c.preset = "paper";
    c.model.patch = {14, 32, 32, 1, 4, 4};
    c.model.d = 128;
    c.model.enc_blocks = 3;
    c.model.enc_heads = 8;
    c.model.dec_layers = 2;
    c.model.dec_heads = 4;
    c.pretrain.phase1 = {500, 512, 5e-4, 5e-6, 0, {0.9, 0.999, 1e-8, 0.005}, 1.0, pre::MaskMode::structured, 2, 0.1, 0.95};
    c.pretrain.phase2 = {200, 512, 1e-4, 1e-6, 0, {0.9, 0.999, 1e-8, 0.005}, 1.0, pre::MaskMode::structured, 4, 0.75, 0.95};
    c.pretrain.phase2_dec_layers = 2;
    c.pretrain.phase2_dec_heads = 8;
    return c;
}

/// Reduced sizes for a single commodity CPU core.
inline RunConfig desk_preset()
{
    RunConfig c = paper_preset();
    c.preset = "desk";
    c.samples = 2000;
    c.model.patch = {14, 32, 32, 1, 8, 4};
    c.model.d = 32;
    c.model.enc_heads = 4;
    c.model.dec_layers = 1;
    c.model.dec_heads = 4;
    c.pretrain.phase1.epochs = 50;
    c.pretrain.phase1.batch = 64;
    c.pretrain.phase1.lr_start = 1e-3;
    c.pretrain.phase1.lr_min = 1e-5;
    c.pretrain.phase2.epochs = 20;
    c.pretrain.phase2.batch = 64;
    c.pretrain.phase2.lr_start = 5e-4;
    c.pretrain.phase2.lr_min = 5e-6;
    c.pretrain.phase2_dec_layers = 2;
    c.pretrain.phase2_dec_heads = 4;
    c.jst_phase1.epochs = 50;
    c.jst_phase1.batch = 64;
    c.tasks.eval_samples = 1000;
    c.tasks.stats_samples = 500;
    for (auto *s : {&c.tasks.sup_beam, &c.tasks.sup_los, &c.tasks.sup_ce})
    {
        s->epochs = 20;
        s->batch = 64;
        s->warmup = 2;
        s->lr_start = 1e-3;
        s->lr_min = 1e-5;
    }
    c.tasks.sup_ce_dec_heads = 4;
    c.profile.repeats = 30;
    c.profile.warmup = 3;
    return c;
}

inline RunConfig preset(const std::string &name)
{
    if (name == "paper")
        return paper_preset();
    if (name == "desk")
        return desk_preset();
    throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

// --------------------------------------------------------------------- JSON

inline const char *to_string(pre::MaskMode m) { return m == pre::MaskMode::structured ? "structured" : "scattered"; }

inline json phase_to_json(const pre::PhaseConfig &p)
{
    return {{"epochs", p.epochs},         {"batch", p.batch},
            {"lr_start", p.lr_start},     {"lr_min", p.lr_min},
            {"warmup", p.warmup},         {"beta1", p.adamw.beta1},
            {"beta2", p.adamw.beta2},     {"eps", p.adamw.eps},
            {"weight_decay", p.adamw.weight_decay}, {"clip", p.clip},
            {"mask", to_string(p.mask_mode)}, {"n_k", p.n_k},
            {"rho_k", p.rho_k},           {"mask_ratio", p.mask_ratio}};
}

inline void phase_from_json(const json &j, pre::PhaseConfig &p, const std::string &section)
{
    reject_unknown_keys(j,
                        {"epochs", "batch", "lr_start", "lr_min", "warmup", "beta1", "beta2", "eps", "weight_decay", "clip",
                         "mask", "n_k", "rho_k", "mask_ratio"},
                        section);
    read_opt(j, "epochs", p.epochs);
    read_opt(j, "batch", p.batch);
    read_opt(j, "lr_start", p.lr_start);
    read_opt(j, "lr_min", p.lr_min);
    read_opt(j, "warmup", p.warmup);
    read_opt(j, "beta1", p.adamw.beta1);
    read_opt(j, "beta2", p.adamw.beta2);
    read_opt(j, "eps", p.adamw.eps);
    read_opt(j, "weight_decay", p.adamw.weight_decay);
    read_opt(j, "clip", p.clip);
    if (j.contains("mask"))
    {
        const auto m = j.at("mask").get<std::string>();
        if (m == "structured")
            p.mask_mode = pre::MaskMode::structured;
        else if (m == "scattered")
            p.mask_mode = pre::MaskMode::scattered;
        else
            throw ConfigError(section + ".mask must be structured or scattered");
    }
    read_opt(j, "n_k", p.n_k);
    read_opt(j, "rho_k", p.rho_k);
    read_opt(j, "mask_ratio", p.mask_ratio);
}

inline json supervised_to_json(const tasks::SupervisedConfig &s)
{
    return {{"epochs", s.epochs}, {"batch", s.batch}, {"lr_start", s.lr_start}, {"lr_min", s.lr_min},
            {"warmup", s.warmup}, {"weight_decay", s.adamw.weight_decay},   {"clip", s.clip},
            {"snr_lo", s.snr_lo}, {"snr_hi", s.snr_hi}};
}

inline void supervised_from_json(const json &j, tasks::SupervisedConfig &s, const std::string &section)
{
    reject_unknown_keys(j, {"epochs", "batch", "lr_start", "lr_min", "warmup", "weight_decay", "clip", "snr_lo", "snr_hi"},
                        section);
    read_opt(j, "epochs", s.epochs);
    read_opt(j, "batch", s.batch);
    read_opt(j, "lr_start", s.lr_start);
    read_opt(j, "lr_min", s.lr_min);
    read_opt(j, "warmup", s.warmup);
    read_opt(j, "weight_decay", s.adamw.weight_decay);
    read_opt(j, "clip", s.clip);
    read_opt(j, "snr_lo", s.snr_lo);
    read_opt(j, "snr_hi", s.snr_hi);
}

inline json scenario_to_json(const chan::ScenarioConfig &s)
{
    return {{"T", s.T},
            {"N_h", s.N_h},
            {"N_v", s.N_v},
            {"F", s.F},
            {"subcarrier_spacing", s.subcarrier_spacing},
            {"cp_overhead", s.cp_overhead},
            {"carrier", s.carrier},
            {"speed", {s.speed_min, s.speed_max}},
            {"los_probability", s.los_probability},
            {"rician_k_db", {s.rician_k_db_min, s.rician_k_db_max}},
            {"clusters", {s.clusters_min, s.clusters_max}},
            {"rays_per_cluster", s.rays_per_cluster},
            {"cluster_angle_spread_deg", s.cluster_angle_spread_deg},
            {"azimuth_span_deg", s.azimuth_span_deg},
            {"elevation_deg", {s.elevation_min_deg, s.elevation_max_deg}},
            {"distance", {s.distance_min, s.distance_max}},
            {"pathloss_exp", {s.pathloss_exp_los, s.pathloss_exp_nlos}},
            {"shadowing_db", {s.shadowing_db_los, s.shadowing_db_nlos}}};
}

namespace detail {

template <typename V>
void read_pair(const json &j, const char *key, V &lo, V &hi, const std::string &section)
{
    if (!j.contains(key))
        return;
    const auto v = j.at(key).get<std::vector<V>>();
    if (v.size() != 2)
        throw ConfigError(section + "." + key + " must list two values");
    lo = v[0];
    hi = v[1];
}

} // namespace detail

inline void scenario_from_json(const json &j, chan::ScenarioConfig &s)
{
    reject_unknown_keys(j,
                        {"T", "N_h", "N_v", "F", "subcarrier_spacing", "cp_overhead", "carrier", "speed", "los_probability",
                         "rician_k_db", "clusters", "rays_per_cluster", "cluster_angle_spread_deg", "azimuth_span_deg",
                         "elevation_deg", "distance", "pathloss_exp", "shadowing_db"},
                        "scenario");
    read_opt(j, "T", s.T);
    read_opt(j, "N_h", s.N_h);
    read_opt(j, "N_v", s.N_v);
    read_opt(j, "F", s.F);
    read_opt(j, "subcarrier_spacing", s.subcarrier_spacing);
    read_opt(j, "cp_overhead", s.cp_overhead);
    read_opt(j, "carrier", s.carrier);
    detail::read_pair(j, "speed", s.speed_min, s.speed_max, "scenario");
    read_opt(j, "los_probability", s.los_probability);
    detail::read_pair(j, "rician_k_db", s.rician_k_db_min, s.rician_k_db_max, "scenario");
    detail::read_pair(j, "clusters", s.clusters_min, s.clusters_max, "scenario");
    read_opt(j, "rays_per_cluster", s.rays_per_cluster);
    read_opt(j, "cluster_angle_spread_deg", s.cluster_angle_spread_deg);
    read_opt(j, "azimuth_span_deg", s.azimuth_span_deg);
    detail::read_pair(j, "elevation_deg", s.elevation_min_deg, s.elevation_max_deg, "scenario");
    detail::read_pair(j, "distance", s.distance_min, s.distance_max, "scenario");
    detail::read_pair(j, "pathloss_exp", s.pathloss_exp_los, s.pathloss_exp_nlos, "scenario");
    detail::read_pair(j, "shadowing_db", s.shadowing_db_los, s.shadowing_db_nlos, "scenario");
}

inline json to_json(const RunConfig &c)
{
    const auto &t = c.tasks;
    const auto &pr = c.pretrain;
    return {{"preset", c.preset},
            {"seed", c.seed},
            {"samples", c.samples},
            {"scenario", scenario_to_json(c.scenario)},
            {"patching", model::patch_to_json(c.model.patch)},
            {"model", model::model_to_json(c.model)},
            {"pretrain",
             {{"phase1", phase_to_json(pr.phase1)},
              {"phase2", phase_to_json(pr.phase2)},
              {"jst_phase1", phase_to_json(c.jst_phase1)},
              {"phase2_dec_layers", pr.phase2_dec_layers},
              {"phase2_dec_heads", pr.phase2_dec_heads},
              {"lambda_enc", pr.weights.lambda_enc},
              {"lambda_dec", pr.weights.lambda_dec},
              {"ablation", pr.ablation.name()},
              {"curriculum", {{"s0", pr.curriculum.s0}, {"s_max", pr.curriculum.s_max}}},
              {"val_fraction", pr.val_fraction}}},
            {"tasks",
             {{"eval_samples", t.eval_samples},
              {"eval_first_id", t.eval_first_id},
              {"stats_samples", t.stats_samples},
              {"label_carrier", t.label_carrier},
              {"codebook",
               {{"h", {t.codebook.h_branch, t.codebook.h_factor}}, {"v", {t.codebook.v_branch, t.codebook.v_factor}}}},
              {"knn", {{"k", t.knn_k}, {"folds", t.knn_folds}, {"beam_top_n", t.beam_top_n}, {"los_top_n", t.los_top_n}}},
              {"snrs", t.snrs},
              {"modes", t.modes},
              {"ce_methods", t.ce_methods},
              {"supervised_beam", supervised_to_json(t.sup_beam)},
              {"supervised_los", supervised_to_json(t.sup_los)},
              {"supervised_ce", supervised_to_json(t.sup_ce)},
              {"supervised_ce_decoder", {t.sup_ce_dec_layers, t.sup_ce_dec_heads}}}},
            {"profile",
             {{"batch", c.profile.batch},
              {"repeats", c.profile.repeats},
              {"warmup", c.profile.warmup},
              {"lockfile", c.profile.lockfile}}}};
}

namespace detail {

inline void codebook_axis(const json &j, std::string &branch, int &factor, const char *axis)
{
    const auto a = j.at(axis);
    if (!a.is_array() || a.size() != 2)
        throw ConfigError(std::string("tasks.codebook.") + axis + " must be [\"over\"|\"under\", factor]");
    branch = a.at(0).get<std::string>();
    factor = a.at(1).get<int>();
    if (branch != "over" && branch != "under")
        throw ConfigError(std::string("tasks.codebook.") + axis + " branch must be over or under");
}

} // namespace detail

/// Overlays a JSON document on `c`. Absent keys keep their current values.
inline void apply_json(const json &j, RunConfig &c)
{
    try
    {
        reject_unknown_keys(j, {"preset", "seed", "samples", "threads", "scenario", "patching", "model", "pretrain", "tasks",
                                "profile"},
                            "root");
        read_opt(j, "seed", c.seed);
        read_opt(j, "samples", c.samples);
        read_opt(j, "threads", c.threads);
        if (j.contains("scenario"))
            scenario_from_json(j.at("scenario"), c.scenario);
        if (j.contains("patching"))
            model::patch_from_json(j.at("patching"), c.model.patch);
        if (j.contains("model"))
            model::model_from_json(j.at("model"), c.model);
        if (j.contains("pretrain"))
        {
            const auto &p = j.at("pretrain");
            reject_unknown_keys(p,
                                {"phase1", "phase2", "jst_phase1", "phase2_dec_layers", "phase2_dec_heads", "lambda_enc",
                                 "lambda_dec", "ablation", "curriculum", "val_fraction"},
                                "pretrain");
            if (p.contains("phase1"))
                phase_from_json(p.at("phase1"), c.pretrain.phase1, "pretrain.phase1");
            if (p.contains("phase2"))
                phase_from_json(p.at("phase2"), c.pretrain.phase2, "pretrain.phase2");
            if (p.contains("jst_phase1"))
                phase_from_json(p.at("jst_phase1"), c.jst_phase1, "pretrain.jst_phase1");
            read_opt(p, "phase2_dec_layers", c.pretrain.phase2_dec_layers);
            read_opt(p, "phase2_dec_heads", c.pretrain.phase2_dec_heads);
            read_opt(p, "lambda_enc", c.pretrain.weights.lambda_enc);
            read_opt(p, "lambda_dec", c.pretrain.weights.lambda_dec);
            if (p.contains("ablation"))
                c.pretrain.ablation = pre::Ablation::parse(p.at("ablation").get<std::string>());
            if (p.contains("curriculum"))
            {
                reject_unknown_keys(p.at("curriculum"), {"s0", "s_max"}, "pretrain.curriculum");
                read_opt(p.at("curriculum"), "s0", c.pretrain.curriculum.s0);
                read_opt(p.at("curriculum"), "s_max", c.pretrain.curriculum.s_max);
            }
            read_opt(p, "val_fraction", c.pretrain.val_fraction);
        }
        if (j.contains("tasks"))
        {
            const auto &t = j.at("tasks");
            auto &o = c.tasks;
            reject_unknown_keys(t,
                                {"eval_samples", "eval_first_id", "stats_samples", "label_carrier", "codebook", "knn",
                                 "snrs", "modes", "ce_methods", "supervised_beam", "supervised_los", "supervised_ce",
                                 "supervised_ce_decoder"},
                                "tasks");
            read_opt(t, "eval_samples", o.eval_samples);
            read_opt(t, "eval_first_id", o.eval_first_id);
            read_opt(t, "stats_samples", o.stats_samples);
            read_opt(t, "label_carrier", o.label_carrier);
            if (t.contains("codebook"))
            {
                reject_unknown_keys(t.at("codebook"), {"h", "v"}, "tasks.codebook");
                if (t.at("codebook").contains("h"))
                    detail::codebook_axis(t.at("codebook"), o.codebook.h_branch, o.codebook.h_factor, "h");
                if (t.at("codebook").contains("v"))
                    detail::codebook_axis(t.at("codebook"), o.codebook.v_branch, o.codebook.v_factor, "v");
            }
            if (t.contains("knn"))
            {
                const auto &k = t.at("knn");
                reject_unknown_keys(k, {"k", "folds", "beam_top_n", "los_top_n"}, "tasks.knn");
                read_opt(k, "k", o.knn_k);
                read_opt(k, "folds", o.knn_folds);
                read_opt(k, "beam_top_n", o.beam_top_n);
                read_opt(k, "los_top_n", o.los_top_n);
            }
            read_opt(t, "snrs", o.snrs);
            read_opt(t, "modes", o.modes);
            read_opt(t, "ce_methods", o.ce_methods);
            if (t.contains("supervised_beam"))
                supervised_from_json(t.at("supervised_beam"), o.sup_beam, "tasks.supervised_beam");
            if (t.contains("supervised_los"))
                supervised_from_json(t.at("supervised_los"), o.sup_los, "tasks.supervised_los");
            if (t.contains("supervised_ce"))
                supervised_from_json(t.at("supervised_ce"), o.sup_ce, "tasks.supervised_ce");
            if (t.contains("supervised_ce_decoder"))
            {
                const auto v = t.at("supervised_ce_decoder").get<std::vector<int>>();
                if (v.size() != 2)
                    throw ConfigError("tasks.supervised_ce_decoder must be [layers, heads]");
                o.sup_ce_dec_layers = v[0];
                o.sup_ce_dec_heads = v[1];
            }
        }
        if (j.contains("profile"))
        {
            const auto &p = j.at("profile");
            reject_unknown_keys(p, {"batch", "repeats", "warmup", "lockfile"}, "profile");
            read_opt(p, "batch", c.profile.batch);
            read_opt(p, "repeats", c.profile.repeats);
            read_opt(p, "warmup", c.profile.warmup);
            read_opt(p, "lockfile", c.profile.lockfile);
        }
    }
    catch (const ConfigError &)
    {
        throw;
    }
    catch (const json::exception &e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(e.what());
    }
}

/// Checks cross-section consistency; messages name the offending axis or key.
inline void validate(const RunConfig &c)
{
    try
    {
        c.scenario.validate();
        const auto &p = c.model.patch;
        if (p.T != c.scenario.T || p.S != c.scenario.S() || p.F != c.scenario.F)
            throw ConfigError("patching.grid does not match the scenario grid (" + std::to_string(c.scenario.T) + "," +
                              std::to_string(c.scenario.S()) + "," + std::to_string(c.scenario.F) + ")");
        c.model.validate();
        for (const auto *ph : {&c.pretrain.phase1, &c.pretrain.phase2, &c.jst_phase1})
            if (ph->epochs < 1 || ph->batch < 1 || !(ph->lr_start > 0) || !(ph->lr_min > 0))
                throw ConfigError("pretrain phases need positive epochs, batch and learning rates");
        if (c.threads < 1)
            throw ConfigError("threads must be >= 1");
        if (!(c.pretrain.val_fraction > 0 && c.pretrain.val_fraction < 1))
            throw ConfigError("pretrain.val_fraction must lie in (0,1)");
        for (const auto &m : c.tasks.modes)
            (void)tasks::input_mode_from(m);
    }
    catch (const ConfigError &)
    {
        throw;
    }
    catch (const std::exception &e)
    {
        throw ConfigError(e.what());
    }
}

/// 64-bit FNV-1a of the canonical JSON echo, as 16 hex digits.
inline std::string config_hash(const RunConfig &c)
{
    const std::string s = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s)
    {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Pretraining settings for the selected ablation: the joint baseline swaps in
/// its own phase-1 schedule and scattered mask.
inline pre::PretrainConfig effective_pretrain(const RunConfig &c)
{
    pre::PretrainConfig p = c.pretrain;
    p.seed = c.seed;
    p.threads = c.threads;
    if (p.ablation.encoder == model::EncoderKind::jst)
        p.phase1 = c.jst_phase1;
    p.curriculum.epochs = p.phase1.epochs;
    return p;
}

inline model::ModelConfig effective_model(const RunConfig &c)
{
    model::ModelConfig m = c.model;
    m.encoder = c.pretrain.ablation.encoder;
    return m;
}

inline tasks::Codebook make_codebook(const RunConfig &c)
{
    auto axis = [](const std::string &b, int f) {
        return b == "over" ? tasks::AxisSampling::over(f) : tasks::AxisSampling::under(f);
    };
    return tasks::build_codebook(c.scenario.N_h, c.scenario.N_v, axis(c.tasks.codebook.h_branch, c.tasks.codebook.h_factor),
                                 axis(c.tasks.codebook.v_branch, c.tasks.codebook.v_factor));
}

} // namespace pilotmae::cli

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


// pilotmae command-line driver: gen | pretrain | eval | profile | gradcheck.
// Exit codes: 0 ok, 1 runtime error, 2 config error.

#include "pilotmae/cli.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

using namespace pilotmae;
using cli::ConfigError;
using cli::RunConfig;

namespace {

struct Common
{
    std::string config_path;
    std::string preset = "desk";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out = "out";
    int threads = 0;
};

void add_common(CLI::App *sub, Common &c)
{
    sub->add_option("--config", c.config_path, "JSON config overlaid on the preset");
    sub->add_option("--preset", c.preset, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--threads", c.threads, "worker threads");
}

RunConfig resolve(const Common &c, CLI::App *sub)
{
    RunConfig rc = cli::preset(c.preset);
    if (!c.config_path.empty())
    {
        std::ifstream is(c.config_path);
        if (!is)
            throw ConfigError("cannot read config " + c.config_path);
        cli::json j;
        try
        {
            j = cli::json::parse(is);
        }
        catch (const cli::json::exception &e)
        {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        if (j.contains("preset"))
            rc = cli::preset(j.at("preset").get<std::string>());
        cli::apply_json(j, rc);
    }
    if (sub->count("--seed"))
        rc.seed = c.seed;
    if (c.threads > 0)
        rc.threads = c.threads;
    return rc;
}

std::vector<double> parse_snrs(const std::string &s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
    {
        try
        {
            out.push_back(std::stod(tok));
        }
        catch (const std::exception &)
        {
            throw ConfigError("bad SNR value '" + tok + "'");
        }
    }
    return out;
}

std::vector<std::string> split_list(const std::string &s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(tok);
    return out;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"pilotmae: pilot-native masked channel autoencoder toolkit"};
    app.require_subcommand(1);

    Common gen_c, pre_c, eval_c, prof_c;
    std::size_t gen_samples = 0;
    std::uint64_t gen_first_id = 0;
    auto *gen = app.add_subcommand("gen", "generate a synthetic channel shard");
    add_common(gen, gen_c);
    gen->add_option("--samples", gen_samples, "number of samples (default: config samples)");
    gen->add_option("--first-id", gen_first_id, "id of the first sample");

    int phase = 1;
    std::string pre_data, pre_ckpt, ablation;
    auto *pretrain = app.add_subcommand("pretrain", "run pretraining phase 1 or 2");
    add_common(pretrain, pre_c);
    pretrain->add_option("--phase", phase, "1 or 2");
    pretrain->add_option("--data", pre_data, "training shard")->required();
    pretrain->add_option("--checkpoint", pre_ckpt, "phase-1 checkpoint (phase 2)");
    pretrain->add_option("--ablation", ablation, "fst+noise+scale|fst+noise|fst+scale|fst|jst");

    std::string task, eval_ckpt, eval_data, train_data, snrs, modes, methods;
    bool plot = false, supervised = false;
    auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on beam, los or ce");
    add_common(eval, eval_c);
    eval->add_option("--task", task, "beam, los or ce")->required()->check(CLI::IsMember({"beam", "los", "ce"}));
    eval->add_option("--checkpoint", eval_ckpt, "pretrained checkpoint");
    eval->add_option("--data", eval_data, "evaluation shard")->required();
    eval->add_option("--train-data", train_data, "training shard (LMMSE statistics, supervised baselines)");
    eval->add_option("--snrs", snrs, "comma-separated SNRs in dB");
    eval->add_option("--modes", modes, "comma-separated input modes (pilot,full)");
    eval->add_option("--methods", methods, "comma-separated ce methods");
    eval->add_flag("--supervised", supervised, "also train and score the supervised baseline (beam, los)");
    eval->add_flag("--plot", plot, "emit results.svg");

    std::string prof_ckpt, prof_data;
    auto *profile = app.add_subcommand("profile", "FLOP and latency report");
    add_common(profile, prof_c);
    profile->add_option("--checkpoint", prof_ckpt, "checkpoint to time (default: fresh weights)");
    profile->add_option("--data", prof_data, "shard for input samples (default: generated)");

    auto *gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the phase-1 loss");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try
    {
        if (*gen)
        {
            const RunConfig rc = resolve(gen_c, gen);
            cli::validate(rc);
            const std::size_t n = gen_samples ? gen_samples : static_cast<std::size_t>(rc.samples);
            cli::cmd_gen(rc, gen_c.out, n, gen_first_id);
            std::cout << "wrote " << n << " samples to " << gen_c.out << " (config " << cli::config_hash(rc) << ")\n";
        }
        else if (*pretrain)
        {
            RunConfig rc = resolve(pre_c, pretrain);
            if (!ablation.empty())
            {
                try
                {
                    rc.pretrain.ablation = pre::Ablation::parse(ablation);
                }
                catch (const std::invalid_argument &e)
                {
                    throw ConfigError(e.what());
                }
            }
            cli::cmd_pretrain(rc, phase, pre_data, pre_ckpt, pre_c.out);
        }
        else if (*eval)
        {
            RunConfig rc = resolve(eval_c, eval);
            if (!snrs.empty())
                rc.tasks.snrs = parse_snrs(snrs);
            if (!modes.empty())
                rc.tasks.modes = split_list(modes);
            if (!methods.empty())
                rc.tasks.ce_methods = split_list(methods);
            std::unique_ptr<cli::Model> m;
            std::string method = "model";
            if (!eval_ckpt.empty())
            {
                cli::json meta;
                m = model::load_checkpoint<float>(eval_ckpt, &meta);
                if (meta.contains("ablation"))
                    method = meta.at("ablation").get<std::string>();
                rc.model = m->config();
            }
            cli::validate(rc);
            const auto data = cli::load_data(rc, eval_data);
            std::vector<chan::ChannelSample> train;
            if (!train_data.empty())
                train = cli::load_data(rc, train_data);
            std::vector<tasks::ResultRow> rows;
            if (task == "ce")
            {
                if (train.empty())
                    throw ConfigError("ce evaluation needs --train-data");
                rows = cli::eval_ce(rc, m.get(), train, data);
            }
            else
            {
                if (!m)
                    throw ConfigError(task + " evaluation needs --checkpoint");
                rows = task == "beam" ? cli::eval_beam(rc, *m, method, data) : cli::eval_los(rc, *m, method, data);
                if (supervised)
                {
                    if (train.empty())
                        throw ConfigError("--supervised needs --train-data");
                    auto s = cli::eval_supervised_classifier(rc, task, train, data);
                    rows.insert(rows.end(), s.begin(), s.end());
                }
            }
            cli::ensure_dir(eval_c.out);
            tasks::write_results_csv((cli::fs::path(eval_c.out) / "results.csv").string(), rows, cli::config_hash(rc),
                                     rc.seed);
            if (plot)
                cli::write_results_svg((cli::fs::path(eval_c.out) / "results.svg").string(), rows, task);
            for (const auto &r : rows)
                std::cout << r.task << ' ' << r.method << ' ' << r.input_mode << ' ' << r.snr_db << " dB " << r.metric << ' '
                          << r.mean << " +- " << r.std << '\n';
        }
        else if (*profile)
        {
            RunConfig rc = resolve(prof_c, profile);
            std::unique_ptr<cli::Model> m;
            if (!prof_ckpt.empty())
            {
                m = model::load_checkpoint<float>(prof_ckpt);
                rc.model = m->config();
            }
            cli::validate(rc);
            prof::BenchmarkLock lock(rc.profile.lockfile);
            const auto data = prof_data.empty()
                                  ? chan::generate_dataset(cli::scenario_of(rc), static_cast<std::size_t>(rc.profile.batch))
                                  : cli::load_data(rc, prof_data);
            const auto rows = cli::profile_encoders(rc, m.get(), data);
            cli::ensure_dir(prof_c.out);
            prof::write_cost_csv((cli::fs::path(prof_c.out) / "cost.csv").string(), rows, cli::config_hash(rc), rc.seed);
            for (const auto &r : rows)
                std::cout << r.encoder << ' ' << r.input_mode << " params " << r.params << " attn_flops " << r.attention_flops
                          << " median " << r.latency_median_ms << " ms/sample\n";
        }
        else if (*gradcheck)
        {
            bool ok = true;
            for (auto kind : {model::EncoderKind::fst, model::EncoderKind::jst})
            {
                const auto r = cli::phase1_gradcheck(kind);
                std::cout << model::to_string(kind) << " phase-1 loss: max rel error " << r.max_rel_error << " ("
                          << r.worst_param << ", " << r.checked << " entries)\n";
                ok = ok && r.max_rel_error < 1e-4;
            }
            return ok ? 0 : 1;
        }
    }
    catch (const ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

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

#include "pilotmae/channelgen.hpp"
#include "pilotmae/gridio.hpp"
#include "pilotmae/model.hpp"
#include "pilotmae/profiler.hpp"
#include "pilotmae/tasks.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace pilotmae;
using model::EncoderKind;

namespace {

model::ModelConfig desk_model(EncoderKind kind)
{
    model::ModelConfig c;
    c.patch = {14, 32, 32, 1, 8, 4};
    c.d = 32;
    c.encoder = kind;
    c.enc_heads = 4;
    c.dec_layers = 1;
    c.dec_heads = 4;
    return c;
}

std::vector<grid::Observation<float>> observations(const model::MaskedAutoencoder<float> &m,
                                                   const std::vector<chan::ChannelSample> &samples, tasks::InputMode mode,
                                                   int n)
{
    const auto mask = tasks::mode_mask(m.config().patch, mode);
    std::vector<grid::Observation<float>> out;
    for (int i = 0; i < n; ++i)
    {
        const auto &s = samples[static_cast<std::size_t>(i) % samples.size()];
        auto rng = chan::stream_rng(1, s.id);
        out.push_back(grid::observe<float>(s, m.pref, m.config().patch, mask, 20.0, rng));
    }
    return out;
}

} // namespace

TEST(Flops, JointOverFactorizedAt14x64)
{
    for (int d : {1, 32, 128})
        for (int layers : {1, 3})
            EXPECT_NEAR(prof::attention_flops(EncoderKind::jst, 14, 64, d, layers) /
                            prof::attention_flops(EncoderKind::fst, 14, 64, d, layers),
                        896.0 / 78.0, 1e-9);
    // 4 * 14 * 64 * 78 * 128
    EXPECT_EQ(prof::attention_flops(EncoderKind::fst, 14, 64, 128, 1), 35782656.0);
}

TEST(Flops, HalvingSpectroSpatialTokens)
{
    const double jst = prof::attention_flops(EncoderKind::jst, 14, 64, 32, 1) /
                       prof::attention_flops(EncoderKind::jst, 14, 32, 32, 1);
    const double fst = prof::attention_flops(EncoderKind::fst, 14, 64, 32, 1) /
                       prof::attention_flops(EncoderKind::fst, 14, 32, 32, 1);
    EXPECT_DOUBLE_EQ(jst, 4.0);
    EXPECT_GE(fst, 2.0);
    EXPECT_LE(fst, 4.0);
}

TEST(Flops, SingleSymbolAndErrors)
{
    EXPECT_EQ(prof::attention_flops(EncoderKind::fst, 1, 10, 2, 1), 4.0 * 10 * 11 * 2);
    EXPECT_EQ(prof::attention_flops(EncoderKind::jst, 1, 10, 2, 1), 4.0 * 100 * 2);
    EXPECT_THROW(prof::attention_flops(EncoderKind::fst, 0, 10, 2, 1), std::invalid_argument);
    EXPECT_THROW(prof::attention_flops(EncoderKind::jst, 2, 10, 2, 0), std::invalid_argument);
}

TEST(Flops, AnalyticCountMatchesExecutedAttention)
{
    chan::ScenarioConfig sc;
    const auto samples = chan::generate_dataset(sc, 1);
    for (auto kind : {EncoderKind::fst, EncoderKind::jst})
        for (auto mode : {tasks::InputMode::pilot, tasks::InputMode::full})
        {
            model::MaskedAutoencoder<float> m(desk_model(kind), 1);
            m.pref = samples[0].mean_power();
            const auto ob = observations(m, samples, mode, 1)[0];
            const auto before = tc::attention_mac_counter().load();
            tc::Graph<float> g(false);
            m.encoder().forward(g, g.constant(ob.visible), ob.mask);
            const double macs = static_cast<double>(tc::attention_mac_counter().load() - before);
            EXPECT_EQ(2.0 * macs, prof::encoder_attention_flops(m.config(), ob.mask.n_k(), ob.mask.n_sf()))
                << model::to_string(kind) << ' ' << tasks::to_string(mode);
        }
}

TEST(Flops, TotalIncludesAttention)
{
    const auto c = desk_model(EncoderKind::fst);
    EXPECT_GT(prof::encoder_flops(c, 14, 32), prof::encoder_attention_flops(c, 14, 32));
    EXPECT_LT(prof::encoder_flops(c, 2, 16), prof::encoder_flops(c, 14, 32));
}

TEST(Latency, OrderingAndBatchAmortization)
{
    chan::ScenarioConfig sc;
    const auto samples = chan::generate_dataset(sc, 8);
    std::map<std::string, double> med;
    for (auto kind : {EncoderKind::fst, EncoderKind::jst})
    {
        model::MaskedAutoencoder<float> m(desk_model(kind), 2);
        m.pref = grid::compute_pref(samples);
        for (auto mode : {tasks::InputMode::pilot, tasks::InputMode::full})
        {
            const auto r = prof::measure_latency(m.encoder(), observations(m, samples, mode, 8), {8, 15, 2},
                                                 tasks::to_string(mode));
            EXPECT_EQ(r.batch, 8);
            EXPECT_EQ(r.repeats, 15);
            EXPECT_GT(r.latency_median_ms, 0.0);
            EXPECT_EQ(r.params, 0u);
            med[std::string(model::to_string(kind)) + "/" + tasks::to_string(mode)] = r.latency_median_ms;
        }
    }
    EXPECT_LT(med["fst/pilot"], med["fst/full"]);
    EXPECT_LT(med["jst/pilot"], med["jst/full"]);
    for (const auto &[k, v] : med)
    {
        if (k != "jst/full")
        {
            EXPECT_LT(v, med["jst/full"]) << k;
        }
    }

    model::MaskedAutoencoder<float> m(desk_model(EncoderKind::fst), 3);
    m.pref = grid::compute_pref(samples);
    const double small = prof::measure_latency(m.encoder(), observations(m, samples, tasks::InputMode::full, 4), {4, 21, 2},
                                               "full")
                             .latency_median_ms;
    const double large = prof::measure_latency(m.encoder(), observations(m, samples, tasks::InputMode::full, 8), {8, 21, 2},
                                               "full")
                             .latency_median_ms;
    EXPECT_LT(std::abs(large - small) / small, 0.25);
}

TEST(Latency, RejectsEmptyBatch)
{
    model::MaskedAutoencoder<float> m(desk_model(EncoderKind::fst), 4);
    EXPECT_THROW(prof::measure_latency(m.encoder(), {}, {1, 1, 0}, "full"), std::invalid_argument);
}

TEST(Lock, SecondHolderIsRefused)
{
    const auto path = (std::filesystem::temp_directory_path() / "pilotmae_test_profile.lock").string();
    std::filesystem::remove(path);
    {
        prof::BenchmarkLock a(path);
        EXPECT_TRUE(std::filesystem::exists(path));
        EXPECT_THROW(prof::BenchmarkLock b(path), prof::LockError);
    }
    EXPECT_FALSE(std::filesystem::exists(path));
}

TEST(CostCsv, HeaderAndRows)
{
    const auto path = (std::filesystem::temp_directory_path() / "pilotmae_test_cost.csv").string();
    prof::CostReport r;
    r.encoder = "fst";
    r.input_mode = "pilot";
    r.hardware = "cpu, 1 thread";
    prof::write_cost_csv(path, {r, r}, "abc", 9);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "encoder,input_mode,params,attention_flops,total_flops,latency_mean_ms,latency_std_ms,latency_median_ms,"
                    "batch,repeats,hardware,config_hash,seed");
    std::getline(is, line);
    EXPECT_NE(line.find("\"cpu, 1 thread\",abc,9"), std::string::npos);
    std::filesystem::remove(path);
}

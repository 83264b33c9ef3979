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
#include "pilotmae/pretrain.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace pilotmae;
using namespace pilotmae::pre;

namespace {

chan::ScenarioConfig tiny_scenario()
{
    chan::ScenarioConfig sc;
    sc.T = 4;
    sc.N_h = 2;
    sc.N_v = 2;
    sc.F = 8;
    return sc;
}

model::ModelConfig tiny_model()
{
    model::ModelConfig c;
    c.patch = {4, 4, 8, 1, 2, 2}; // n_t=4, N_sf=8, D_p=8
    c.d = 8;
    c.enc_blocks = 1;
    c.enc_heads = 2;
    c.dec_layers = 1;
    c.dec_heads = 2;
    c.ffn_mult = 2;
    return c;
}

PretrainConfig tiny_pretrain(int epochs)
{
    PretrainConfig p;
    p.phase1.epochs = epochs;
    p.phase1.batch = 8;
    p.phase1.lr_start = 1e-3;
    p.phase1.lr_min = 1e-5;
    p.phase1.n_k = 2;
    p.phase1.rho_k = 0.5;
    p.phase2 = p.phase1;
    p.phase2.n_k = 3;
    p.phase2.rho_k = 0.75;
    p.phase2_dec_layers = 1;
    p.phase2_dec_heads = 2;
    p.curriculum.epochs = epochs;
    return p;
}

grid::Observation<double> tiny_observation(std::uint64_t id, double snr)
{
    const auto c = tiny_model();
    const auto s = chan::generate_sample(tiny_scenario(), id);
    std::mt19937_64 rng(id);
    auto mask = grid::build_random_mask(c.patch, 2, 0.5, rng);
    return grid::observe<double>(s, s.mean_power(), c.patch, mask, snr, rng);
}

bool all_zero(const tc::Tensor<double> &t)
{
    for (double v : t.values())
        if (v != 0.0)
            return false;
    return true;
}

} // namespace

TEST(Losses, ReconTrivialCases)
{
    tc::Tensor<double> z({3, 4});
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (auto &v : z.values())
        v = nd(rng);
    tc::Graph<double> g(false);
    EXPECT_EQ(recon_loss(g.constant(z), z).value()[0], 0.0);
    double want = 0;
    for (double v : z.values())
        want += v * v;
    EXPECT_NEAR(recon_loss(g.constant(tc::Tensor<double>({3, 4})), z).value()[0], want / 3, 1e-12);
}

TEST(Losses, ReconTwoPatchHandComputed)
{
    tc::Tensor<double> pred({2, 2}), z({2, 2});
    pred.at(0, 0) = 1.0;
    pred.at(0, 1) = -0.5;
    pred.at(1, 0) = 0.25;
    pred.at(1, 1) = 2.0;
    z.at(0, 0) = 0.5;
    z.at(0, 1) = 0.5;
    z.at(1, 0) = -0.75;
    z.at(1, 1) = 1.0;
    // Patch 0: 0.25 + 1.0; patch 1: 1.0 + 1.0; mean over two patches.
    tc::Graph<double> g(false);
    EXPECT_NEAR(recon_loss(g.constant(pred), z).value()[0], (1.25 + 2.0) / 2, 1e-7);
}

TEST(Losses, ReconOfZeroPredictionMatchesNormalizedMoments)
{
    const auto ob = tiny_observation(3, grid::kNoNoise);
    const auto st = grid::patch_stats(ob.clean);
    const auto masked = ob.mask.masked_indices();
    double want = 0;
    for (int p : masked)
        want += ob.clean.cols() * st.var[static_cast<std::size_t>(p)] / (st.var[static_cast<std::size_t>(p)] + grid::kEpsRecon);
    want /= static_cast<double>(masked.size());
    EXPECT_NEAR(zero_predictor_loss(ob), want, 1e-9);
}

TEST(Losses, ScaleLossConstantPatch)
{
    const double c = 0.7;
    tc::Tensor<double> patch({1, 8}, c);
    const auto st = grid::patch_stats(patch);
    tc::Graph<double> g(false);
    const double l = scale_loss(g.constant(tc::Tensor<double>({1, 2})), st.scale).value()[0];
    EXPECT_NEAR(l, c * c + std::log(grid::kEpsScale) * std::log(grid::kEpsScale), 1e-9);
    EXPECT_EQ(scale_loss(g.constant(st.scale), st.scale).value()[0], 0.0);
}

TEST(Losses, TotalIsWeightedSum)
{
    EXPECT_NEAR(total_loss(1.0, 0.2, 0.4, LossWeights{}), 1.03, 1e-15);
    EXPECT_EQ(total_loss(1.0, 0.2, 0.4, LossWeights{0, 0}), 1.0);
}

TEST(Losses, PartsReproduceTotal)
{
    model::MaskedAutoencoder<double> m(tiny_model(), 2);
    const auto ob = tiny_observation(4, 10.0);
    tc::Graph<double> g(false);
    LossParts parts;
    const double total = phase1_loss(g, m, ob, LossWeights{}, true, &parts).value()[0];
    EXPECT_NEAR(total, parts.recon + 0.05 * parts.scale_enc + 0.05 * parts.scale_dec, 1e-12);
    EXPECT_NEAR(parts.total, total, 1e-12);
    tc::Graph<double> g2(false);
    LossParts none;
    const double recon_only = phase1_loss(g2, m, ob, LossWeights{}, false, &none).value()[0];
    EXPECT_NEAR(recon_only, parts.recon, 1e-12);
    EXPECT_EQ(none.scale_enc, 0.0);
}

TEST(Losses, DecoderScaleGradientReachesEncoder)
{
    model::MaskedAutoencoder<double> m(tiny_model(), 3);
    const auto ob = tiny_observation(5, grid::kNoNoise);
    const auto masked = ob.mask.masked_indices();
    const auto st = grid::patch_stats(ob.clean);
    for (auto *p : m.all_params())
        p->zero_grad();
    tc::Graph<double> g;
    auto enc = m.encoder().forward(g, g.constant(ob.visible), ob.mask);
    auto dec = tc::gather_rows(m.decoder().forward(g, enc, ob.visible_idx), masked);
    g.backward(scale_loss(m.decoder().scale(g, dec), grid::gather_patch_rows(st.scale, masked)));
    g.flush_param_grads();
    EXPECT_FALSE(all_zero(m.encoder_params().find("enc.embed.w")->grad));
    EXPECT_FALSE(all_zero(m.encoder_params().find("enc.block0.attn_sf.v.w")->grad));
}

TEST(Losses, TargetsComeFromCleanChannel)
{
    const auto noisy = tiny_observation(6, 0.0);
    const auto clean = tiny_observation(6, grid::kNoNoise);
    EXPECT_TRUE(std::equal(noisy.clean.values().begin(), noisy.clean.values().end(), clean.clean.values().begin()));
    EXPECT_FALSE(std::equal(noisy.visible.values().begin(), noisy.visible.values().end(), clean.visible.values().begin()));
}

TEST(Losses, PhaseTwoReadoutIsDetachedFromDecoderBody)
{
    model::MaskedAutoencoder<double> m(tiny_model(), 7);
    const auto ob = tiny_observation(7, grid::kNoNoise);
    auto grads_of = [&](bool readout) {
        for (auto *p : m.all_params())
            p->zero_grad();
        tc::Graph<double> g;
        auto [recon, read] = phase2_losses(g, m, ob);
        g.backward(readout ? read : recon);
        g.flush_param_grads();
    };
    grads_of(true);
    EXPECT_TRUE(all_zero(m.decoder_params().find("dec.layer0.attn.v.w")->grad));
    EXPECT_TRUE(all_zero(m.encoder_params().find("enc.embed.w")->grad));
    EXPECT_FALSE(all_zero(m.decoder_params().find("dec.scale_head.w")->grad));
    grads_of(false);
    EXPECT_TRUE(all_zero(m.decoder_params().find("dec.scale_head.w")->grad));
    EXPECT_FALSE(all_zero(m.decoder_params().find("dec.layer0.attn.v.w")->grad));
}

TEST(Readout, RecoversExactLinearMap)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    tc::Tensor<double> x({50, 3}), y({50, 2});
    const double w[3][2] = {{0.5, -1.0}, {2.0, 0.25}, {-0.75, 1.5}}, b[2] = {-3.0, 0.125};
    for (int i = 0; i < 50; ++i)
    {
        for (int j = 0; j < 3; ++j)
            x.at(i, j) = n01(rng);
        for (int k = 0; k < 2; ++k)
            y.at(i, k) = b[k] + x.at(i, 0) * w[0][k] + x.at(i, 1) * w[1][k] + x.at(i, 2) * w[2][k];
    }
    ReadoutFit fit(3, 2);
    // Two blocks must give the same answer as one.
    tc::Tensor<double> x1({20, 3}), y1({20, 2}), x2({30, 3}), y2({30, 2});
    x1.mat() = x.mat().topRows(20), y1.mat() = y.mat().topRows(20);
    x2.mat() = x.mat().bottomRows(30), y2.mat() = y.mat().bottomRows(30);
    fit.add(x1, y1);
    fit.add(x2, y2);
    EXPECT_EQ(fit.rows(), 50u);
    tc::Parameter<double> pw("w", tc::Tensor<double>({3, 2})), pb("b", tc::Tensor<double>({1, 2}));
    fit.solve_into(pw, pb);
    for (int k = 0; k < 2; ++k)
    {
        EXPECT_NEAR(pb.value.at(0, k), b[k], 1e-6);
        for (int j = 0; j < 3; ++j)
            EXPECT_NEAR(pw.value.at(j, k), w[j][k], 1e-6);
    }
}

TEST(Readout, ConstantFeaturesFallBackToTargetMean)
{
    tc::Tensor<double> x({4, 2}, 0.0), y({4, 1});
    for (int i = 0; i < 4; ++i)
        y.at(i, 0) = i;
    ReadoutFit fit(2, 1);
    fit.add(x, y);
    tc::Parameter<double> pw("w", tc::Tensor<double>({2, 1})), pb("b", tc::Tensor<double>({1, 1}));
    fit.solve_into(pw, pb);
    EXPECT_NEAR(pb.value.at(0, 0), 1.5, 1e-9);
    EXPECT_TRUE(std::isfinite(pw.value.at(0, 0)));
    EXPECT_THROW(ReadoutFit(2, 1).solve_into(pw, pb), std::logic_error);
}

TEST(Curriculum, EndpointsMidpointMonotone)
{
    Curriculum c;
    c.s0 = 40;
    c.epochs = 501;
    EXPECT_EQ(c.lower_bound(0), 40.0);
    EXPECT_NEAR(c.lower_bound(500), 0.0, 1e-12);
    EXPECT_NEAR(c.lower_bound(250), 20.0, 1e-9);
    for (int e = 1; e < 501; ++e)
        EXPECT_LE(c.lower_bound(e), c.lower_bound(e - 1));
    EXPECT_THROW(c.lower_bound(501), std::out_of_range);
    EXPECT_THROW(c.lower_bound(-1), std::out_of_range);
}

TEST(Curriculum, SamplingBoundsAndMean)
{
    Curriculum c;
    c.epochs = 100;
    std::mt19937_64 rng(8);
    EXPECT_EQ(c.sample(0, rng), 40.0);
    double acc = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
    {
        const double s = c.sample(99, rng);
        EXPECT_GE(s, c.lower_bound(99));
        EXPECT_LE(s, c.s_max);
        acc += s;
    }
    EXPECT_NEAR(acc / n, 20.0, 0.5);
    for (int e = 0; e < 100; e += 7)
        EXPECT_GE(c.sample(e, rng), c.lower_bound(e));
}

TEST(Split, SeededDisjointTenPercent)
{
    const auto a = split_train_val(100, 0.1, 1), b = split_train_val(100, 0.1, 1), c = split_train_val(100, 0.1, 2);
    EXPECT_EQ(a.val.size(), 10u);
    EXPECT_EQ(a.train.size(), 90u);
    EXPECT_EQ(a.val, b.val);
    EXPECT_NE(a.val, c.val);
    std::vector<std::size_t> all = a.train;
    all.insert(all.end(), a.val.begin(), a.val.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i)
        EXPECT_EQ(all[i], i);
    EXPECT_THROW(split_train_val(1, 0.1, 1), std::invalid_argument);
}

TEST(Ablation, NamesRoundTrip)
{
    for (const char *s : {"fst+noise+scale", "fst+noise", "fst+scale", "fst", "jst"})
        EXPECT_EQ(Ablation::parse(s).name(), s);
    EXPECT_THROW(Ablation::parse("fst+jst"), std::invalid_argument);
}

TEST(Observe, NoiseToggleAndCurriculumStart)
{
    model::MaskedAutoencoder<double> m(tiny_model(), 9);
    const auto s = chan::generate_sample(tiny_scenario(), 10);
    auto cfg = tiny_pretrain(5);
    const auto off = detail::observe_for(m, s, cfg.phase1, false, cfg.curriculum, 0, 1, kSaltTrain, true);
    EXPECT_TRUE(std::isinf(off.snr_db));
    const auto on = detail::observe_for(m, s, cfg.phase1, true, cfg.curriculum, 0, 1, kSaltTrain, true);
    EXPECT_EQ(on.snr_db, 40.0);
    const auto later = detail::observe_for(m, s, cfg.phase1, true, cfg.curriculum, 4, 1, kSaltTrain, true);
    EXPECT_GE(later.snr_db, 0.0);
    EXPECT_LE(later.snr_db, 40.0);
}

TEST(Training, SmokeRunWritesFiniteLog)
{
    const auto data = chan::generate_dataset(tiny_scenario(), 64);
    model::MaskedAutoencoder<float> m(tiny_model(), 10);
    const auto split = split_train_val(data.size(), 0.1, 1);
    int calls = 0;
    const auto res = run_phase1(m, data, split, tiny_pretrain(1), [&](const EpochLog &) { ++calls; });
    EXPECT_EQ(calls, 1);
    ASSERT_EQ(res.log.size(), 1u);
    EXPECT_TRUE(std::isfinite(res.log[0].recon));
    EXPECT_TRUE(std::isfinite(res.log[0].val_loss));
    EXPECT_GT(res.val_zero_recon, 0.0);
    EXPECT_GT(m.pref, 0.0);

    const auto path = (std::filesystem::temp_directory_path() / "pilotmae_test_log.csv").string();
    write_log_csv(path, res.log, "cafe", 1);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "epoch,lr,s_min,L_recon,L_scale_enc,L_scale_dec,val_loss,wall_seconds,config_hash,seed");
    std::filesystem::remove(path);
}

TEST(Training, DeterministicInDoublePrecision)
{
    const auto data = chan::generate_dataset(tiny_scenario(), 40);
    const auto split = split_train_val(data.size(), 0.1, 1);
    auto run = [&] {
        model::MaskedAutoencoder<double> m(tiny_model(), 11);
        auto res = run_phase1(m, data, split, tiny_pretrain(2));
        return std::make_pair(res.log.back().recon, m.encoder_params().find("enc.embed.w")->value[3]);
    };
    EXPECT_EQ(run(), run());
}

TEST(Training, LossDecreasesOverEpochs)
{
    const auto data = chan::generate_dataset(tiny_scenario(), 200);
    const auto split = split_train_val(data.size(), 0.1, 1);
    model::MaskedAutoencoder<float> m(tiny_model(), 12);
    auto cfg = tiny_pretrain(12);
    cfg.ablation.noise = false;
    const auto res = run_phase1(m, data, split, cfg);
    EXPECT_LT(res.log.back().recon, res.log.front().recon);
}

TEST(Training, PhaseTwoFreezesEncoderAndIgnoresWeights)
{
    const auto data = chan::generate_dataset(tiny_scenario(), 40);
    const auto split = split_train_val(data.size(), 0.1, 1);
    model::MaskedAutoencoder<double> base(tiny_model(), 13);
    run_phase1(base, data, split, tiny_pretrain(1));
    auto run = [&](LossWeights w) {
        auto m = std::make_unique<model::MaskedAutoencoder<double>>(tiny_model(), 13);
        auto src = base.all_params(), dst = m->all_params();
        for (std::size_t i = 0; i < src.size(); ++i)
            dst[i]->value = src[i]->value;
        m->pref = base.pref;
        auto cfg = tiny_pretrain(2);
        cfg.weights = w;
        const auto res = run_phase2(*m, data, split, cfg);
        return std::make_pair(std::move(m), res.log.back().recon);
    };
    auto [a, la] = run(LossWeights{});
    auto [b, lb] = run(LossWeights{1.0, 2.0});
    EXPECT_EQ(la, lb);
    auto before = base.encoder_params().all(), after = a->encoder_params().all();
    for (std::size_t i = 0; i < before.size(); ++i)
        EXPECT_TRUE(std::equal(before[i]->value.values().begin(), before[i]->value.values().end(),
                               after[i]->value.values().begin()))
            << before[i]->name;
}

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
#include "pilotmae/tasks.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

using namespace pilotmae;
using namespace pilotmae::tasks;
using chan::cdouble;
using chan::cfloat;

namespace {

std::vector<cfloat> random_grid(int T, int S, int F, std::uint64_t seed)
{
    auto rng = chan::stream_rng(seed, 1);
    std::normal_distribution<float> nd;
    std::vector<cfloat> H(static_cast<std::size_t>(T) * S * F);
    for (auto &h : H)
        h = {nd(rng), nd(rng)};
    return H;
}

// Brute-force oracle: explicit steering entries and a plain triple loop.
int brute_force_label(const std::vector<cfloat> &H, int T, int N_h, int N_v, int F, int K_h, int K_v)
{
    const int S = N_h * N_v;
    int best = -1;
    double best_gain = -1;
    for (int mv = 0; mv < K_v; ++mv)
        for (int mh = 0; mh < K_h; ++mh)
        {
            double gain = 0;
            for (int t = 0; t < T; ++t)
                for (int f = 0; f < F; ++f)
                {
                    cdouble acc = 0;
                    for (int nv = 0; nv < N_v; ++nv)
                        for (int nh = 0; nh < N_h; ++nh)
                        {
                            const double ph = 2 * std::numbers::pi * (static_cast<double>(nh * mh) / K_h +
                                                                      static_cast<double>(nv * mv) / K_v);
                            const cdouble w = std::polar(1.0 / std::sqrt(static_cast<double>(S)), ph);
                            acc += std::conj(w) * cdouble(H[(static_cast<std::size_t>(t) * S + nv * N_h + nh) * F + f]);
                        }
                    gain += std::norm(acc);
                }
            gain /= T * F;
            if (gain > best_gain)
            {
                best_gain = gain;
                best = mv * K_h + mh;
            }
        }
    return best;
}

model::ModelConfig desk_model()
{
    model::ModelConfig c;
    c.patch = {14, 32, 32, 1, 8, 4};
    c.d = 8;
    c.enc_blocks = 1;
    c.enc_heads = 2;
    c.dec_layers = 1;
    c.dec_heads = 2;
    c.ffn_mult = 2;
    return c;
}

double nmse_of(const std::vector<cdouble> &est, const std::vector<cfloat> &H)
{
    std::vector<cfloat> e(est.size());
    for (std::size_t i = 0; i < e.size(); ++i)
        e[i] = cfloat(static_cast<float>(est[i].real()), static_cast<float>(est[i].imag()));
    return nmse_linear(e, H);
}

KroneckerStats unit_stats(Eigen::MatrixXcd Rt, Eigen::MatrixXcd Rf)
{
    Rt /= Rt.diagonal().real().mean();
    Rf /= Rf.diagonal().real().mean();
    return {Rt, Rf};
}

} // namespace

TEST(Codebook, SizesAndUnitNorm)
{
    const auto cb = build_codebook(8, 4, AxisSampling::over(2), AxisSampling::over(2));
    EXPECT_EQ(cb.M(), 128);
    EXPECT_EQ(cb.K_h, 16);
    EXPECT_EQ(cb.K_v, 8);
    for (const auto &c : {cb, build_codebook(8, 4, AxisSampling::under(2), AxisSampling::under(2)),
                          build_codebook(8, 4, AxisSampling::over(1), AxisSampling::over(1))})
        for (int m = 0; m < c.M(); ++m)
            EXPECT_NEAR(c.W.col(m).norm(), 1.0, 1e-7);
    EXPECT_EQ(build_codebook(8, 4, AxisSampling::under(2), AxisSampling::under(2)).M(), 8);
}

TEST(Codebook, CriticalSamplingIsUnitary)
{
    const auto cb = build_codebook(8, 4, AxisSampling::over(1), AxisSampling::over(1));
    EXPECT_EQ(cb.M(), 32);
    const Eigen::MatrixXcd G = cb.W.adjoint() * cb.W;
    EXPECT_LT((G - Eigen::MatrixXcd::Identity(32, 32)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Codebook, OversampledContainsCriticalDirections)
{
    const auto crit = build_codebook(8, 4, AxisSampling::over(1), AxisSampling::over(1));
    const auto over = build_codebook(8, 4, AxisSampling::over(2), AxisSampling::over(2));
    for (int mv = 0; mv < 4; ++mv)
        for (int mh = 0; mh < 8; ++mh)
            EXPECT_LT((over.W.col(over.flat(2 * mh, 2 * mv)) - crit.W.col(crit.flat(mh, mv))).norm(), 1e-12);
}

TEST(Codebook, FlatIndexRoundTripsAndErrors)
{
    const auto cb = build_codebook(8, 4, AxisSampling::over(2), AxisSampling::over(2));
    for (int m = 0; m < cb.M(); ++m)
    {
        const auto [mh, mv] = cb.split(m);
        EXPECT_EQ(cb.flat(mh, mv), m);
    }
    EXPECT_THROW(build_codebook(8, 4, AxisSampling::under(3), AxisSampling::over(1)), std::invalid_argument);
    EXPECT_THROW(build_codebook(8, 4, AxisSampling::over(0), AxisSampling::over(1)), std::invalid_argument);
}

TEST(BeamLabel, MatchesBruteForceOn100Channels)
{
    const auto cb = build_codebook(8, 4, AxisSampling::over(2), AxisSampling::over(2));
    const int T = 2, F = 3;
    for (std::uint64_t i = 0; i < 100; ++i)
    {
        const auto H = random_grid(T, 32, F, i);
        EXPECT_EQ(beam_label(H, T, 32, F, cb), brute_force_label(H, T, 8, 4, F, 16, 8)) << i;
    }
}

TEST(BeamLabel, GridAlignedPathAndScaleInvariance)
{
    const auto cb = build_codebook(8, 4, AxisSampling::over(2), AxisSampling::over(2));
    const int T = 2, F = 2, k = 37;
    std::vector<cfloat> H(static_cast<std::size_t>(T) * 32 * F);
    for (int t = 0; t < T; ++t)
        for (int s = 0; s < 32; ++s)
            for (int f = 0; f < F; ++f)
            {
                const cdouble v = cb.W(s, k) * std::polar(1.0, 0.3 * t + 0.1 * f);
                H[(static_cast<std::size_t>(t) * 32 + s) * F + f] = cfloat(static_cast<float>(v.real()), static_cast<float>(v.imag()));
            }
    EXPECT_EQ(beam_label(H, T, 32, F, cb), k);
    const auto R = random_grid(3, 32, 4, 5);
    auto R2 = R;
    for (auto &h : R2)
        h *= 1e-4f;
    EXPECT_EQ(beam_label(R, 3, 32, 4, cb), beam_label(R2, 3, 32, 4, cb));
    // All-zero channel: every gain ties, smallest index wins.
    EXPECT_EQ(beam_label(std::vector<cfloat>(64), 1, 32, 2, cb), 0);
    EXPECT_THROW(beam_label(H, T, 16, F, cb), std::invalid_argument);
}

TEST(Knn, FoldsAreDisjointAndCover)
{
    const auto folds = make_folds(103, 10, 4);
    std::set<int> seen;
    std::size_t total = 0;
    for (const auto &f : folds)
    {
        EXPECT_GE(f.size(), 10u);
        EXPECT_LE(f.size(), 11u);
        total += f.size();
        seen.insert(f.begin(), f.end());
    }
    EXPECT_EQ(total, 103u);
    EXPECT_EQ(seen.size(), 103u);
    EXPECT_THROW(make_folds(5, 10, 0), std::invalid_argument);
}

TEST(Knn, HandComputedDudaniScores)
{
    // Unit vectors at 0, 10, 30, 60, 90 degrees; query at 3 degrees, k = 3.
    // Cosine distances of the three nearest: 1-cos3 = 0.00137047,
    // 1-cos7 = 0.00745385, 1-cos27 = 0.10899348, so the middle weight is
    // (0.10899348 - 0.00745385) / (0.10899348 - 0.00137047) = 0.943475.
    const double deg = std::numbers::pi / 180;
    Eigen::MatrixXd X(5, 2);
    const double ang[5] = {0, 10, 30, 60, 90};
    for (int i = 0; i < 5; ++i)
        X.row(i) << std::cos(ang[i] * deg), std::sin(ang[i] * deg);
    const std::vector<int> labels{0, 1, 1, 2, 0};
    Eigen::VectorXd q(2);
    q << std::cos(3 * deg), std::sin(3 * deg);
    const auto s = knn_scores(X, labels, {0, 1, 2, 3, 4}, q, 3, 3);
    EXPECT_NEAR(s[0], 1.0, 1e-12);
    EXPECT_NEAR(s[1], 0.943475, 1e-6);
    EXPECT_EQ(s[2], 0.0);
    EXPECT_TRUE(in_top_n(s, 0, 1));
    // Training subset without the 0-degree point: 10 degrees is now nearest.
    const auto s2 = knn_scores(X, labels, {1, 2, 3}, q, 3, 3);
    EXPECT_NEAR(s2[1], 1.0 + (std::cos(27 * deg) - std::cos(57 * deg)) / (std::cos(7 * deg) - std::cos(57 * deg)), 1e-12);
    EXPECT_EQ(s2[2], 0.0);
    // Equal distances for every neighbour: uniform weights.
    Eigen::MatrixXd Y(3, 2);
    Y << 1, 0, 1, 0, 1, 0;
    Eigen::VectorXd q2(2);
    q2 << 0, 1;
    const auto u = knn_scores(Y, {0, 1, 1}, {0, 1, 2}, q2, 3, 2);
    EXPECT_EQ(u[0], 1.0);
    EXPECT_EQ(u[1], 2.0);
}

TEST(Knn, TopNTieOrder)
{
    EXPECT_TRUE(in_top_n({1.0, 1.0, 0.5}, 0, 1));
    EXPECT_FALSE(in_top_n({1.0, 1.0, 0.5}, 1, 1));
    EXPECT_TRUE(in_top_n({1.0, 1.0, 0.5}, 1, 2));
    EXPECT_TRUE(in_top_n({0.0, 2.0, 0.5}, 2, 2));
}

TEST(Knn, DuplicatedPointsGivePerfectAccuracy)
{
    // 10 distinct points, each repeated 20 times: every query has an exact
    // copy in its training part whatever the fold assignment.
    FeatureSet fs;
    const int classes = 5, protos = 10, copies = 20, n = protos * copies;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd P(protos, 6);
    for (int i = 0; i < P.size(); ++i)
        P(i) = nd(rng);
    fs.X.resize(n, 6);
    for (int i = 0; i < n; ++i)
    {
        fs.X.row(i) = P.row(i % protos);
        fs.labels.push_back((i % protos) % classes);
    }
    for (int top : {1, 3})
    {
        const auto r = knn_eval(fs, classes, KnnConfig{5, 10, top, 3});
        EXPECT_DOUBLE_EQ(r.accuracy.mean, 1.0);
        EXPECT_EQ(r.accuracy.n, 10);
    }
}

TEST(Knn, RandomFeaturesHitNullRate)
{
    FeatureSet fs;
    const int classes = 16, n = 1600;
    fs.X.resize(n, 8);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (int i = 0; i < fs.X.size(); ++i)
        fs.X(i) = nd(rng);
    for (int i = 0; i < n; ++i)
        fs.labels.push_back(i % classes);
    const auto r = knn_eval(fs, classes, KnnConfig{20, 10, 3, 5}, 2);
    const double p = 3.0 / classes, sd = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(r.accuracy.mean, p, 4 * sd);
}

TEST(Knn, InvariantToGlobalRescaling)
{
    FeatureSet fs;
    fs.X.resize(120, 4);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int i = 0; i < fs.X.size(); ++i)
        fs.X(i) = nd(rng);
    for (int i = 0; i < 120; ++i)
        fs.labels.push_back(fs.X(i, 0) > 0 ? 1 : 0);
    const KnnConfig cfg{5, 10, 1, 7};
    FeatureSet scaled = fs;
    scaled.X *= 123.0;
    EXPECT_EQ(knn_eval(fs, 2, cfg).fold_accuracy, knn_eval(scaled, 2, cfg).fold_accuracy);
    EXPECT_GT(knn_eval(fs, 2, cfg).accuracy.mean, 0.8);
}

TEST(Knn, ErrorsAndDegenerateFolds)
{
    FeatureSet fs;
    fs.X = Eigen::MatrixXd::Random(30, 3);
    fs.labels.assign(30, 0);
    auto r = knn_eval(fs, 2, KnnConfig{5, 10, 1, 0});
    EXPECT_EQ(r.degenerate_folds, 10);
    EXPECT_THROW(knn_eval(fs, 2, KnnConfig{27, 10, 1, 0}), std::invalid_argument);
    fs.labels[0] = 4;
    EXPECT_THROW(knn_eval(fs, 2, KnnConfig{5, 10, 1, 0}), std::invalid_argument);
}

TEST(Metrics, NmseConventions)
{
    const auto H = random_grid(2, 4, 3, 9);
    EXPECT_EQ(nmse_db(H, H), kNmseFloorDb);
    EXPECT_NEAR(nmse_db(std::vector<cfloat>(H.size()), H), 0.0, 1e-12);
    auto H2 = H;
    for (auto &h : H2)
        h *= 2.0f;
    EXPECT_NEAR(nmse_db(H2, H), 0.0, 1e-6);
    // Mean of per-sample linear values, then dB.
    EXPECT_NEAR(nmse_db(std::vector<double>{0.1, 0.001}), 10 * std::log10(0.0505), 1e-12);
    EXPECT_THROW(nmse_linear(H, std::vector<cfloat>(H.size())), std::invalid_argument);
    const auto ms = mean_std({1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(ms.mean, 2.5);
    EXPECT_NEAR(ms.std, std::sqrt(5.0 / 3.0), 1e-15);
}

TEST(Linear, ConstantChannelRecoveredExactly)
{
    const int T = 14, S = 2, F = 32;
    std::vector<cdouble> Y(static_cast<std::size_t>(T) * S * F, 0);
    const auto p = grid::PilotPattern::standard();
    for (int s = 0; s < S; ++s)
        for (int t : p.symbols)
            for (int f : p.subcarriers)
                Y[(static_cast<std::size_t>(t) * S + s) * F + f] = cdouble(0.3 + s, -0.7);
    const auto H = interpolate_linear(Y, T, S, F, p);
    for (int t = 0; t < T; ++t)
        for (int s = 0; s < S; ++s)
            for (int f = 0; f < F; ++f)
                EXPECT_LT(std::abs(H[(static_cast<std::size_t>(t) * S + s) * F + f] - cdouble(0.3 + s, -0.7)), 1e-15);
}

TEST(Linear, LinearInFrequencyExactInsideSpan)
{
    const int T = 14, S = 1, F = 32;
    const auto p = grid::PilotPattern::standard();
    std::vector<cdouble> Y(static_cast<std::size_t>(T) * F, 0);
    for (int t : p.symbols)
        for (int f : p.subcarriers)
            Y[static_cast<std::size_t>(t) * F + f] = cdouble(1.0 + 0.25 * f, -0.5 * f);
    const auto H = interpolate_linear(Y, T, S, F, p);
    for (int f = 0; f <= 27; ++f)
        EXPECT_LT(std::abs(H[2 * F + f] - cdouble(1.0 + 0.25 * f, -0.5 * f)), 1e-12);
    // Nearest-edge extension beyond the last pilot.
    EXPECT_EQ(H[2 * F + 31], H[2 * F + 27]);
}

TEST(Linear, MatchesScalarReference)
{
    const int T = 14, S = 3, F = 32;
    const auto p = grid::PilotPattern::standard();
    const auto R = random_grid(T, S, F, 11);
    std::vector<cdouble> Y(R.size(), 0);
    for (int s = 0; s < S; ++s)
        for (int t : p.symbols)
            for (int f : p.subcarriers)
                Y[(static_cast<std::size_t>(t) * S + s) * F + f] = cdouble(R[(static_cast<std::size_t>(t) * S + s) * F + f]);
    const auto H = interpolate_linear(Y, T, S, F, p);
    // Reference: piecewise-linear weights computed directly for each coordinate.
    auto weights = [](const std::vector<int> &xs, int x) {
        std::vector<double> w(xs.size(), 0.0);
        if (x <= xs.front())
            w.front() = 1;
        else if (x >= xs.back())
            w.back() = 1;
        else
            for (std::size_t i = 0; i + 1 < xs.size(); ++i)
                if (xs[i] <= x && x <= xs[i + 1])
                {
                    const double a = static_cast<double>(x - xs[i]) / (xs[i + 1] - xs[i]);
                    w[i] = 1 - a;
                    w[i + 1] = a;
                    break;
                }
        return w;
    };
    double max_err = 0;
    for (int t = 0; t < T; ++t)
        for (int s = 0; s < S; ++s)
            for (int f = 0; f < F; ++f)
            {
                const auto wt = weights(p.symbols, t), wf = weights(p.subcarriers, f);
                cdouble want = 0;
                for (std::size_t a = 0; a < wt.size(); ++a)
                    for (std::size_t b = 0; b < wf.size(); ++b)
                        want += wt[a] * wf[b] * Y[(static_cast<std::size_t>(p.symbols[a]) * S + s) * F + p.subcarriers[b]];
                max_err = std::max(max_err, std::abs(H[(static_cast<std::size_t>(t) * S + s) * F + f] - want));
            }
    EXPECT_LT(max_err, 1e-6);
}

TEST(Linear, SinglePilotAxisRejected)
{
    std::vector<cdouble> Y(14 * 32, 0);
    EXPECT_THROW(interpolate_linear(Y, 14, 1, 32, grid::PilotPattern{{2}, {0, 1, 2, 3, 8, 9, 10, 11}}), std::invalid_argument);
}

TEST(Lmmse, LowRankChannelInPilotSpanRecovered)
{
    const int T = 14, S = 2, F = 32;
    const auto p = grid::PilotPattern::standard();
    // Time: constant plus ramp (rank 2). Frequency: three delays (rank 3).
    Eigen::MatrixXcd Bt(T, 2), Bf(F, 3);
    for (int t = 0; t < T; ++t)
    {
        Bt(t, 0) = 1.0;
        Bt(t, 1) = (t - 6.5) / 6.5;
    }
    for (int f = 0; f < F; ++f)
        for (int k = 0; k < 3; ++k)
            Bf(f, k) = std::polar(1.0, -2 * std::numbers::pi * f * (0.01 + 0.02 * k));
    const auto st = unit_stats(Bt * Bt.adjoint(), Bf * Bf.adjoint());
    const auto data = chan::kronecker_gaussian_channels(T, S, F, st.R_t, st.R_f, 5, 3);
    for (const auto &c : data)
    {
        std::vector<cdouble> Y(c.H.size(), 0);
        for (int s = 0; s < S; ++s)
            for (int t : p.symbols)
                for (int f : p.subcarriers)
                    Y[c.index(t, s, f)] = cdouble(c.at(t, s, f));
        EXPECT_LT(nmse_of(lmmse_sequential(Y, T, S, F, p, st, 0.0), c.H), 1e-6);
    }
}

TEST(Lmmse, InfiniteNoiseShrinksToZero)
{
    const int T = 14, S = 1, F = 32;
    const auto p = grid::PilotPattern::standard();
    const auto st = unit_stats(chan::exponential_correlation(T, 0.95), chan::exponential_correlation(F, 0.9));
    const auto c = chan::kronecker_gaussian_channels(T, S, F, st.R_t, st.R_f, 1, 4)[0];
    std::vector<cdouble> Y(c.H.size(), 0);
    for (int t : p.symbols)
        for (int f : p.subcarriers)
            Y[c.index(t, 0, f)] = cdouble(c.at(t, 0, f));
    EXPECT_NEAR(nmse_of(lmmse_sequential(Y, T, S, F, p, st, 1e12), c.H), 1.0, 1e-6);
}

TEST(Lmmse, StatisticsEstimateRecoversKroneckerFactors)
{
    const int T = 6, S = 2, F = 8;
    const auto Rt = chan::exponential_correlation(T, 0.9), Rf = chan::exponential_correlation(F, 0.6, 0.4);
    const auto data = chan::kronecker_gaussian_channels(T, S, F, Rt, Rf, 20000, 5);
    const auto st = estimate_kronecker_stats(data);
    EXPECT_NEAR(st.R_t.diagonal().real().mean(), 1.0, 1e-12);
    EXPECT_LT((st.R_t - Rt).norm() / Rt.norm(), 0.05);
    EXPECT_LT((st.R_f - Rf).norm() / Rf.norm(), 0.05);
}

TEST(Lmmse, MatchedStatisticsBeatLinearAndMismatched)
{
    const int T = 14, S = 2, F = 32;
    const auto p = grid::PilotPattern::standard();
    const auto Rt = chan::exponential_correlation(T, 0.9), Rf = chan::exponential_correlation(F, 0.8, 0.3);
    const auto data = chan::kronecker_gaussian_channels(T, S, F, Rt, Rf, 60, 6);
    const auto gold = estimate_kronecker_stats(data);
    const auto wrong = unit_stats(chan::exponential_correlation(T, 0.3), chan::exponential_correlation(F, 0.99, -0.5));
    grid::PatchConfig pc{T, S, F, 1, 1, 4};
    double g = 0, l = 0, w = 0;
    for (const auto &c : data)
    {
        auto rng = chan::stream_rng(7, c.id);
        const auto po = observe_pilots<double>(c, 1.0, pc, p, 10.0, rng);
        g += nmse_linear(estimate_lmmse(po, 1.0, gold, "gold").H, c.H);
        w += nmse_linear(estimate_lmmse(po, 1.0, wrong, "practical").H, c.H);
        l += nmse_linear(estimate_linear(po, 1.0).H, c.H);
    }
    EXPECT_LT(g, l);
    EXPECT_LT(g, w);
}

TEST(PilotObservation, ZeroOutsidePilotsAndNoiseScale)
{
    const int T = 14, S = 4, F = 32;
    const auto c = chan::kronecker_gaussian_channels(T, S, F, chan::exponential_correlation(T, 0.9),
                                                     chan::exponential_correlation(F, 0.9), 1, 8)[0];
    grid::PatchConfig pc{T, S, F, 1, 2, 4};
    std::mt19937_64 rng(9);
    const auto po = observe_pilots<double>(c, 1.0, pc, grid::PilotPattern::standard(), 20.0, rng);
    EXPECT_NEAR(po.sigma2_rel, 0.01, 1e-15);
    int nonzero = 0;
    for (const auto &y : po.Y)
        nonzero += y != cdouble(0, 0);
    EXPECT_EQ(nonzero, 32 * S);
}

TEST(DecoderEstimate, ShapeAndPatternAgnostic)
{
    model::MaskedAutoencoder<float> m(desk_model(), 1);
    chan::ScenarioConfig sc;
    const auto s = chan::generate_sample(sc, 3);
    m.pref = s.mean_power();
    const grid::PilotPattern shifted{{3, 10}, {4, 5, 6, 7, 12, 13, 14, 15, 20, 21, 22, 23, 28, 29, 30, 31}};
    for (const auto &pat : {grid::PilotPattern::standard(), shifted})
    {
        std::mt19937_64 rng(4);
        const auto po = observe_pilots<float>(s, m.pref, m.config().patch, pat, 20.0, rng);
        int clamped = -1;
        const auto out = estimate_decoder(m, po, &clamped);
        EXPECT_EQ(out.H.size(), s.H.size());
        EXPECT_GE(clamped, 0);
        EXPECT_EQ(out.method, "decoder");
        // Observed pilot REs are passed through.
        const int t = pat.symbols[0], f = pat.subcarriers[0];
        EXPECT_NEAR(std::abs(out.H[s.index(t, 5, f)] - cfloat(static_cast<float>(po.Y[s.index(t, 5, f)].real()),
                                                              static_cast<float>(po.Y[s.index(t, 5, f)].imag())) *
                                                           std::sqrt(static_cast<float>(m.pref))),
                    0.0, 1e-3 * std::abs(out.H[s.index(t, 5, f)]) + 1e-12);
    }
}

TEST(Features, PilotModeTokenCountAndDeterminism)
{
    model::ModelConfig fine;
    EXPECT_EQ(mode_mask(fine.patch, InputMode::pilot).num_visible(), 64);
    EXPECT_EQ(mode_mask(fine.patch, InputMode::full).num_visible(), 896);

    model::MaskedAutoencoder<float> m(desk_model(), 2);
    chan::ScenarioConfig sc;
    const auto data = chan::generate_dataset(sc, 4);
    m.pref = grid::compute_pref(data);
    const std::vector<int> labels{0, 1, 0, 1};
    const auto a = extract_features(m, data, labels, InputMode::full, grid::kNoNoise, 1);
    const auto b = extract_features(m, data, labels, InputMode::full, grid::kNoNoise, 1, 2);
    EXPECT_EQ(a.X, b.X);
    EXPECT_EQ(a.X.cols(), 8);
    const auto n1 = extract_features(m, data, labels, InputMode::pilot, 10.0, 1);
    const auto n2 = extract_features(m, data, labels, InputMode::pilot, 10.0, 1);
    EXPECT_EQ(n1.X, n2.X);
    const auto n3 = extract_features(m, data, labels, InputMode::pilot, 10.0, 2);
    EXPECT_NE(n1.X, n3.X);

    auto scaled = data;
    for (auto &s : scaled)
        for (auto &h : s.H)
            h *= 3.0f;
    const auto c = extract_features(m, scaled, labels, InputMode::full, grid::kNoNoise, 1);
    EXPECT_GT((c.X - a.X).norm(), 0.0);
    EXPECT_EQ(input_mode_from("pilot"), InputMode::pilot);
    EXPECT_THROW(input_mode_from("partial"), std::invalid_argument);
}

TEST(Supervised, HeadWidthsAndZeroFilledInput)
{
    const auto c = desk_model();
    SupervisedClassifier<float> los(c, 2, 1), beam(c, 128, 1);
    EXPECT_EQ(los.head.w->value.cols(), 2);
    EXPECT_EQ(beam.head.w->value.cols(), 128);
    EXPECT_THROW(SupervisedClassifier<float>(c, 1, 1), std::invalid_argument);

    SupervisedEstimator<float> est(c, grid::PilotPattern::standard(), 2);
    chan::ScenarioConfig sc;
    const auto s = chan::generate_sample(sc, 5);
    std::mt19937_64 rng(6);
    const auto po = observe_pilots<float>(s, s.mean_power(), c.patch, est.pattern, 10.0, rng);
    const auto in = est.input_patches(po);
    std::set<int> pilot_rows(po.obs.visible_idx.begin(), po.obs.visible_idx.end());
    for (int p = 0; p < in.rows(); ++p)
    {
        double e = 0;
        for (int j = 0; j < in.cols(); ++j)
            e += std::abs(in.at(p, j));
        EXPECT_EQ(e > 0, pilot_rows.count(p) == 1) << p;
    }
    EXPECT_EQ(est.estimate(po, "supervised-fst").H.size(), s.H.size());
    EXPECT_EQ(supervised_task_from("ce"), SupervisedTask::ce);
}

TEST(Supervised, ClassifierTrainingReducesLoss)
{
    model::ModelConfig c = desk_model();
    c.patch = {4, 4, 8, 1, 2, 2};
    chan::ScenarioConfig sc;
    sc.T = 4;
    sc.N_h = 2;
    sc.N_v = 2;
    sc.F = 8;
    const auto data = chan::generate_dataset(sc, 64);
    std::vector<int> labels;
    for (const auto &s : data)
        labels.push_back(s.los ? 1 : 0);
    SupervisedClassifier<float> clf(c, 2, 3);
    SupervisedConfig cfg;
    cfg.epochs = 8;
    cfg.batch = 16;
    cfg.warmup = 1;
    cfg.lr_start = 3e-3;
    const auto log = train_classifier(clf, data, labels, cfg);
    ASSERT_EQ(log.size(), 8u);
    EXPECT_LT(log.back().loss, log.front().loss);
    std::vector<int> bad(labels.size(), 2);
    EXPECT_THROW(train_classifier(clf, data, bad, cfg), std::invalid_argument);
}

TEST(Results, CsvHasOneRowPerPoint)
{
    const auto path = (std::filesystem::temp_directory_path() / "pilotmae_test_results.csv").string();
    std::vector<ResultRow> rows{{"beam", "fst", "pilot", 30, "top3", 0.5, 0.01, 10},
                                {"beam", "fst", "full", 30, "top3", 0.6, 0.02, 10}};
    write_results_csv(path, rows, "h", 3);
    std::ifstream is(path);
    std::string line;
    int n = 0;
    std::getline(is, line);
    EXPECT_NE(line.find("task,method,input_mode,snr_db,metric,mean,std,n"), std::string::npos);
    while (std::getline(is, line))
        ++n;
    EXPECT_EQ(n, 2);
    std::filesystem::remove(path);
}

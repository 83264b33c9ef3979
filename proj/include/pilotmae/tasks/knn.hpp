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

#include "pilotmae/tasks/metrics.hpp"
#include "pilotmae/tensorcore/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace pilotmae::tasks {

enum class InputMode
{
    pilot,
    full
};

inline const char *to_string(InputMode m) { return m == InputMode::pilot ? "pilot" : "full"; }

inline InputMode input_mode_from(const std::string &s)
{
    if (s == "pilot")
        return InputMode::pilot;
    if (s == "full")
        return InputMode::full;
    throw std::invalid_argument("unknown input mode '" + s + "' (expected pilot or full)");
}

/// One mean-pooled feature row per sample, with its label.
struct FeatureSet
{
    Eigen::MatrixXd X; ///< n x d
    std::vector<int> labels;
    InputMode mode = InputMode::full;
    double snr_db = 0;

    int size() const { return static_cast<int>(X.rows()); }
};

struct KnnConfig
{
    int k = 20;
    int folds = 10;
    int top_n = 1;
    std::uint64_t seed = 0;
};

struct KnnResult
{
    std::vector<double> fold_accuracy;
    MeanStd accuracy;
    int degenerate_folds = 0; ///< folds whose training part holds a single class
};

/// Seeded partition of [0, n) into `folds` disjoint parts of near-equal size.
inline std::vector<std::vector<int>> make_folds(int n, int folds, std::uint64_t seed)
{
    if (folds < 2 || folds > n)
        throw std::invalid_argument("knn: need 2 <= folds <= samples");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i % folds)].push_back(idx[static_cast<std::size_t>(i)]);
    return out;
}

/// Class scores for one query from its k nearest training points under cosine
/// distance, with Dudani weights (d_k - d_i) / (d_k - d_1); all weights are 1
/// when d_k == d_1. `Xn` rows must be L2-normalized.
inline std::vector<double> knn_scores(const Eigen::MatrixXd &Xn, const std::vector<int> &labels,
                                      const std::vector<int> &train, const Eigen::VectorXd &query, int k, int num_classes)
{
    const int kk = std::min<int>(k, static_cast<int>(train.size()));
    std::vector<std::pair<double, int>> dist(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        dist[i] = {1.0 - Xn.row(train[i]).dot(query), train[i]};
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    std::vector<double> score(static_cast<std::size_t>(num_classes), 0.0);
    const double d1 = dist[0].first, dk = dist[static_cast<std::size_t>(kk - 1)].first;
    for (int i = 0; i < kk; ++i)
    {
        const double w = dk > d1 ? (dk - dist[static_cast<std::size_t>(i)].first) / (dk - d1) : 1.0;
        score[static_cast<std::size_t>(labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(i)].second)])] += w;
    }
    return score;
}

/// True when `label` is among the n highest scores; ties rank the smaller class first.
inline bool in_top_n(const std::vector<double> &score, int label, int n)
{
    int ahead = 0;
    for (int c = 0; c < static_cast<int>(score.size()); ++c)
        if (score[static_cast<std::size_t>(c)] > score[static_cast<std::size_t>(label)] ||
            (score[static_cast<std::size_t>(c)] == score[static_cast<std::size_t>(label)] && c < label))
            ++ahead;
    return ahead < n;
}

inline Eigen::MatrixXd l2_normalize_rows(const Eigen::MatrixXd &X)
{
    Eigen::MatrixXd Xn = X;
    for (int i = 0; i < Xn.rows(); ++i)
    {
        const double nrm = Xn.row(i).norm();
        if (nrm > 0)
            Xn.row(i) /= nrm;
    }
    return Xn;
}

/// k-fold kNN readout: each fold is scored by neighbours from the other folds.
inline KnnResult knn_eval(const FeatureSet &fs, int num_classes, const KnnConfig &cfg, int threads = 1)
{
    const int n = fs.size();
    if (static_cast<int>(fs.labels.size()) != n)
        throw std::invalid_argument("knn: one label per feature row required");
    if (cfg.k < 1 || cfg.top_n < 1)
        throw std::invalid_argument("knn: k and top_n must be >= 1");
    for (int y : fs.labels)
        if (y < 0 || y >= num_classes)
            throw std::invalid_argument("knn: label " + std::to_string(y) + " outside [0," + std::to_string(num_classes) + ")");
    const auto folds = make_folds(n, cfg.folds, cfg.seed);
    for (const auto &f : folds)
        if (n - static_cast<int>(f.size()) < cfg.k + 1)
            throw std::invalid_argument("knn: fold training split smaller than k+1");
    const Eigen::MatrixXd Xn = l2_normalize_rows(fs.X);

    KnnResult res;
    res.fold_accuracy.assign(folds.size(), 0.0);
    std::vector<char> degenerate(folds.size(), 0);
    tc::parallel_for(static_cast<int>(folds.size()), threads, [&](int fi) {
        const auto &test = folds[static_cast<std::size_t>(fi)];
        std::vector<char> in_test(static_cast<std::size_t>(n), 0);
        for (int i : test)
            in_test[static_cast<std::size_t>(i)] = 1;
        std::vector<int> train;
        for (int i = 0; i < n; ++i)
            if (!in_test[static_cast<std::size_t>(i)])
                train.push_back(i);
        const int first = fs.labels[static_cast<std::size_t>(train[0])];
        degenerate[static_cast<std::size_t>(fi)] =
            std::all_of(train.begin(), train.end(), [&](int i) { return fs.labels[static_cast<std::size_t>(i)] == first; });
        int hit = 0;
        for (int q : test)
        {
            const auto s = knn_scores(Xn, fs.labels, train, Xn.row(q).transpose(), cfg.k, num_classes);
            hit += in_top_n(s, fs.labels[static_cast<std::size_t>(q)], cfg.top_n);
        }
        res.fold_accuracy[static_cast<std::size_t>(fi)] = static_cast<double>(hit) / static_cast<double>(test.size());
    });
    res.degenerate_folds = static_cast<int>(std::count(degenerate.begin(), degenerate.end(), 1));
    res.accuracy = mean_std(res.fold_accuracy);
    return res;
}

} // namespace pilotmae::tasks

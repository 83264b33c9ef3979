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

#include "pilotmae/gridio/observe.hpp"
#include "pilotmae/model/mae.hpp"
#include "pilotmae/tasks/knn.hpp"

namespace pilotmae::tasks {

inline constexpr std::uint64_t kSaltFeatures = 0x66656174;

/// Keep set for an input mode: the pilot pattern's patches or the whole grid.
inline grid::MaskSpec mode_mask(const grid::PatchConfig &pc, InputMode mode,
                                const grid::PilotPattern &pattern = grid::PilotPattern::standard())
{
    return mode == InputMode::pilot ? grid::build_pilot_mask(pc, pattern) : grid::MaskSpec::full(pc);
}

/// Mean over the frozen encoder's output tokens for one observation.
template <typename T>
Eigen::VectorXd pooled_feature(const model::Encoder<T> &enc, const grid::Observation<T> &ob)
{
    tc::Graph<T> g(false);
    auto h = enc.forward(g, g.constant(ob.visible), ob.mask);
    const auto &v = tc::mean_rows(h).value();
    Eigen::VectorXd out(v.cols());
    for (int j = 0; j < v.cols(); ++j)
        out(j) = static_cast<double>(v[static_cast<std::size_t>(j)]);
    return out;
}

/// Features for every sample at one SNR. Noise draws come from a per-sample
/// stream keyed on (seed, sample id, snr), so repeated calls agree.
template <typename T>
FeatureSet extract_features(const model::Encoder<T> &enc, double pref, const std::vector<chan::ChannelSample> &samples,
                            const std::vector<int> &labels, InputMode mode, double snr_db, std::uint64_t seed,
                            int threads = 1, const grid::PilotPattern &pattern = grid::PilotPattern::standard())
{
    if (labels.size() != samples.size())
        throw std::invalid_argument("extract_features: one label per sample required");
    const auto &pc = enc.config().patch;
    const auto mask = mode_mask(pc, mode, pattern);
    FeatureSet fs;
    fs.mode = mode;
    fs.snr_db = snr_db;
    fs.labels = labels;
    fs.X.resize(static_cast<Eigen::Index>(samples.size()), enc.config().d);
    const std::uint64_t snr_key = std::isfinite(snr_db) ? static_cast<std::uint64_t>(std::llround(snr_db * 1000.0)) : 0xffff;
    tc::parallel_for(static_cast<int>(samples.size()), threads, [&](int i) {
        const auto &s = samples[static_cast<std::size_t>(i)];
        auto rng = chan::stream_rng(seed, s.id, kSaltFeatures ^ (snr_key << 20) ^ static_cast<std::uint64_t>(mode));
        const auto ob = grid::observe<T>(s, pref, pc, mask, snr_db, rng);
        fs.X.row(i) = pooled_feature(enc, ob).transpose();
    });
    return fs;
}

template <typename T>
FeatureSet extract_features(const model::MaskedAutoencoder<T> &m, const std::vector<chan::ChannelSample> &samples,
                            const std::vector<int> &labels, InputMode mode, double snr_db, std::uint64_t seed,
                            int threads = 1, const grid::PilotPattern &pattern = grid::PilotPattern::standard())
{
    return extract_features(m.encoder(), m.pref, samples, labels, mode, snr_db, seed, threads, pattern);
}

} // namespace pilotmae::tasks

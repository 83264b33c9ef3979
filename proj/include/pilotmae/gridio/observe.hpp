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
#include "pilotmae/gridio/mask.hpp"
#include "pilotmae/gridio/noise.hpp"
#include "pilotmae/gridio/patch.hpp"

namespace pilotmae::grid {

/// What the encoder sees for one sample: the kept patches (possibly noisy),
/// their flat indices, and the clean full patch set for targets.
template <typename T>
struct Observation
{
    MaskSpec mask;
    std::vector<int> visible_idx;
    tc::Tensor<T> clean;   ///< P x D_p, clean normalized patches
    tc::Tensor<T> visible; ///< V x D_p, encoder input
    double P_b = 0;        ///< clean power on kept patches
    double snr_db = kNoNoise;
};

template <typename T>
tc::Tensor<T> gather_patch_rows(const tc::Tensor<T> &patches, const std::vector<int> &rows)
{
    tc::Tensor<T> out({static_cast<int>(rows.size()), patches.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(patches.row(rows[i]), patches.cols(), out.row(static_cast<int>(i)));
    return out;
}

/// Normalizes by P_ref, patchifies, selects the kept set, and adds AWGN
/// (relative to the clean power on the kept set) to the visible tokens only.
template <typename T>
Observation<T> observe(const chan::ChannelSample &s, double pref, const PatchConfig &cfg, MaskSpec mask, double snr_db,
                       std::mt19937_64 &rng)
{
    Observation<T> ob;
    ob.mask = std::move(mask);
    ob.mask.validate();
    ob.visible_idx = ob.mask.visible_indices();
    ob.clean = patchify<T>(normalize(s, pref), cfg);
    ob.visible = gather_patch_rows(ob.clean, ob.visible_idx);
    ob.P_b = complex_power(ob.visible);
    ob.snr_db = snr_db;
    inject_awgn(ob.visible, ob.P_b, snr_db, rng);
    return ob;
}

} // namespace pilotmae::grid

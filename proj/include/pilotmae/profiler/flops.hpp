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

#include "pilotmae/model/mae.hpp"

#include <cstdint>
#include <stdexcept>

namespace pilotmae::prof {

using model::EncoderKind;

/// Score plus weighted-sum work of one attention pass over n tokens of width
/// d: 2 n^2 d multiply-adds each, 2 FLOPs per multiply-add.
inline constexpr double kAttentionConstant = 4.0;

/// Attention FLOPs of `layers` encoder layers on an n_t x N_sf token grid. A
/// factorized layer is one temporal plus one spectro-spatial pass:
///   fst: c * n_t * N_sf * (n_t + N_sf) * d,   jst: c * (n_t * N_sf)^2 * d.
inline double attention_flops(EncoderKind kind, int n_t, int N_sf, int d, int layers)
{
    if (n_t < 1 || N_sf < 1 || d < 1 || layers < 1)
        throw std::invalid_argument("attention_flops: dimensions must be positive");
    const double nt = n_t, ns = N_sf;
    const double per = kind == EncoderKind::fst ? nt * ns * (nt + ns) : (nt * ns) * (nt * ns);
    return kAttentionConstant * per * d * layers;
}

/// Attention FLOPs actually executed by an encoder on a rows x cols grid.
/// Joint encoders run 2 * enc_blocks full passes; factorized encoders run
/// enc_blocks (temporal + spectro-spatial) pairs.
inline double encoder_attention_flops(const model::ModelConfig &c, int rows, int cols)
{
    return c.encoder == EncoderKind::fst ? attention_flops(EncoderKind::fst, rows, cols, c.d, c.enc_blocks)
                                         : attention_flops(EncoderKind::jst, rows, cols, c.d, c.attention_sublayers());
}

/// Matmul FLOPs of the encoder for a rows x cols token grid: embedding,
/// q/k/v/o projections, feed-forward, scale head, plus attention. Norms and
/// pointwise ops are left out.
inline double encoder_flops(const model::ModelConfig &c, int rows, int cols)
{
    const double n = static_cast<double>(rows) * cols, d = c.d;
    const double embed = 2.0 * n * c.patch.D_p() * d;
    const double proj = 2.0 * n * 4.0 * d * d;
    const double ffn = 2.0 * n * 2.0 * c.ffn_mult * d * d;
    const double per_block = 2.0 * proj + ffn;
    return embed + c.enc_blocks * per_block + encoder_attention_flops(c, rows, cols);
}

} // namespace pilotmae::prof

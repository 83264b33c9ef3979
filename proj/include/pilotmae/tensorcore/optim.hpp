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

#include "pilotmae/tensorcore/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace pilotmae::tc {

struct AdamWConfig
{
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.005;
};

/// AdamW with bias-corrected moments and decoupled weight decay:
///   theta <- theta * (1 - lr * wd)
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// Frozen parameters (trainable == false) are skipped.
template <typename T>
class AdamW
{
public:
    AdamW(std::vector<Parameter<T> *> params, AdamWConfig cfg = {}) : params_(std::move(params)), cfg_(cfg)
    {
        for (auto *p : params_)
        {
            m_.emplace_back(p->value.shape(), T(0));
            v_.emplace_back(p->value.shape(), T(0));
        }
    }

    void step(double lr)
    {
        if (!(lr > 0.0))
            throw std::invalid_argument("AdamW: learning rate must be positive, got " + std::to_string(lr));
        for (auto *p : params_)
            if (p->trainable && !p->grad.all_finite())
                throw NonFiniteError("AdamW: non-finite gradient in " + p->name);
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const T b1 = static_cast<T>(cfg_.beta1);
        const T b2 = static_cast<T>(cfg_.beta2);
        const T decay = static_cast<T>(1.0 - lr * cfg_.weight_decay);
        for (std::size_t k = 0; k < params_.size(); ++k)
        {
            Parameter<T> &p = *params_[k];
            if (!p.trainable)
                continue;
            auto th = p.value.values();
            auto g = p.grad.values();
            auto m = m_[k].values();
            auto v = v_[k].values();
            for (std::size_t i = 0; i < th.size(); ++i)
            {
                m[i] = b1 * m[i] + (T(1) - b1) * g[i];
                v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
                const double mh = static_cast<double>(m[i]) / bc1;
                const double vh = static_cast<double>(v[i]) / bc2;
                th[i] = th[i] * decay - static_cast<T>(lr * mh / (std::sqrt(vh) + cfg_.eps));
            }
        }
    }

    std::int64_t step_count() const { return t_; }
    const AdamWConfig &config() const { return cfg_; }
    const Tensor<T> &first_moment(std::size_t k) const { return m_[k]; }
    const Tensor<T> &second_moment(std::size_t k) const { return v_[k]; }

private:
    std::vector<Parameter<T> *> params_;
    AdamWConfig cfg_;
    std::vector<Tensor<T>> m_, v_;
    std::int64_t t_ = 0;
};

/// Cosine decay from lr_start at epoch 0 to lr_min at epoch total-1.
inline double cosine_lr(int epoch, int total, double lr_start, double lr_min)
{
    if (total < 1)
        throw std::invalid_argument("cosine_lr: total epochs must be >= 1");
    if (epoch < 0 || epoch > total - 1)
        throw std::out_of_range("cosine_lr: epoch " + std::to_string(epoch) + " outside [0," + std::to_string(total - 1) + "]");
    if (total == 1)
        return lr_start;
    const double c = std::cos(std::numbers::pi * epoch / (total - 1));
    return lr_min + 0.5 * (lr_start - lr_min) * (1.0 + c);
}

/// Linear warmup over the first `warmup` epochs, then cosine decay over the rest.
inline double warmup_cosine_lr(int epoch, int total, int warmup, double lr_start, double lr_min)
{
    if (warmup <= 0)
        return cosine_lr(epoch, total, lr_start, lr_min);
    if (total < 1 || epoch < 0 || epoch > total - 1)
        throw std::out_of_range("warmup_cosine_lr: epoch outside schedule");
    if (warmup >= total)
        return lr_start * (epoch + 1) / static_cast<double>(total);
    if (epoch < warmup)
        return lr_start * (epoch + 1) / static_cast<double>(warmup);
    return cosine_lr(epoch - warmup, total - warmup, lr_start, lr_min);
}

/// Scales all gradients by max_norm / ||g|| when the global L2 norm exceeds
/// max_norm. Returns the norm before clipping.
template <typename T>
double clip_global_norm(const std::vector<Parameter<T> *> &params, double max_norm = 1.0)
{
    double sq = 0.0;
    for (const auto *p : params)
        if (p->trainable)
            for (T g : p->grad.values())
                sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (norm > max_norm)
    {
        const T s = static_cast<T>(max_norm / norm);
        for (auto *p : params)
            if (p->trainable)
                for (T &g : p->grad.values())
                    g *= s;
    }
    return norm;
}

template <typename T>
void zero_grads(const std::vector<Parameter<T> *> &params)
{
    for (auto *p : params)
        p->zero_grad();
}

} // namespace pilotmae::tc

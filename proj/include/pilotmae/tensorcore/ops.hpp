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

#include "pilotmae/tensorcore/graph.hpp"

#include <atomic>
#include <cstdint>
#include <numbers>

namespace pilotmae::tc {

namespace detail {

template <typename T>
void require_same_graph(Var<T> a, Var<T> b)
{
    if (a.graph != b.graph)
        throw std::invalid_argument("operands belong to different graphs");
}

template <typename T>
void require_same_shape(const char *op, Var<T> a, Var<T> b)
{
    require_same_graph(a, b);
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
void add_into(Tensor<T> *dst, const Tensor<T> &src, T scale = T(1))
{
    if (!dst)
        return;
    auto d = dst->values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += scale * s[i];
}

} // namespace detail

/// Scalar multiply-accumulate counter for attention score and weighted-sum
/// kernels. Used by the profiler to cross-check analytic FLOP formulas.
inline std::atomic<std::uint64_t> &attention_mac_counter()
{
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(Var<T> a, Var<T> b)
{
    detail::require_same_shape("add", a, b);
    Graph<T> &g = *a.graph;
    Tensor<T> out = a.value();
    out.mat() += b.value().mat();
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T> &g, const Tensor<T> &dy) {
        detail::add_into(g.grad_slot(a), dy);
        detail::add_into(g.grad_slot(b), dy);
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b)
{
    detail::require_same_shape("sub", a, b);
    Graph<T> &g = *a.graph;
    Tensor<T> out = a.value();
    out.mat() -= b.value().mat();
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T> &g, const Tensor<T> &dy) {
        detail::add_into(g.grad_slot(a), dy);
        detail::add_into(g.grad_slot(b), dy, T(-1));
    });
}

/// Hadamard product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b)
{
    detail::require_same_shape("mul", a, b);
    Graph<T> &g = *a.graph;
    Tensor<T> out = a.value();
    out.mat().array() *= b.value().mat().array();
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T> &g, const Tensor<T> &dy) {
        if (auto *ga = g.grad_slot(a))
            ga->mat().array() += dy.mat().array() * g.value(b).mat().array();
        if (auto *gb = g.grad_slot(b))
            gb->mat().array() += dy.mat().array() * g.value(a).mat().array();
    });
}

template <typename T>
Var<T> scale(Var<T> a, T s)
{
    Graph<T> &g = *a.graph;
    Tensor<T> out = a.value();
    out.mat() *= s;
    return g.emit(std::move(out), {a}, [a, s](Graph<T> &g, const Tensor<T> &dy) {
        detail::add_into(g.grad_slot(a), dy, s);
    });
}

/// alpha * a for a learnable scalar alpha of shape [1,1].
template <typename T>
Var<T> scale_by(Var<T> a, Var<T> alpha)
{
    detail::require_same_graph(a, alpha);
    if (alpha.value().size() != 1)
        throw ShapeError("scale_by: alpha must hold one element, got " + shape_str(alpha.shape()));
    Graph<T> &g = *a.graph;
    const T s = alpha.value()[0];
    Tensor<T> out = a.value();
    out.mat() *= s;
    return g.emit(std::move(out), {a, alpha}, [a, alpha](Graph<T> &g, const Tensor<T> &dy) {
        const T s = g.value(alpha)[0];
        detail::add_into(g.grad_slot(a), dy, s);
        if (auto *gs = g.grad_slot(alpha))
            (*gs)[0] += (dy.mat().array() * g.value(a).mat().array()).sum();
    });
}

template <typename T>
Var<T> square(Var<T> a)
{
    Graph<T> &g = *a.graph;
    Tensor<T> out = a.value();
    out.mat().array() = out.mat().array().square();
    return g.emit(std::move(out), {a}, [a](Graph<T> &g, const Tensor<T> &dy) {
        if (auto *ga = g.grad_slot(a))
            ga->mat().array() += T(2) * dy.mat().array() * g.value(a).mat().array();
    });
}

/// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
template <typename T>
Var<T> gelu(Var<T> a)
{
    Graph<T> &g = *a.graph;
    Tensor<T> out = a.value();
    const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    for (auto &x : out.values())
        x = T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
    return g.emit(std::move(out), {a}, [a](Graph<T> &g, const Tensor<T> &dy) {
        auto *ga = g.grad_slot(a);
        if (!ga)
            return;
        const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
        const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
        const auto x = g.value(a).values();
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
            const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x[i] * x[i]);
            (*ga)[i] += dy[i] * (cdf + x[i] * pdf);
        }
    });
}

/// Stops gradient flow.
template <typename T>
Var<T> detach(Var<T> a)
{
    return a.graph->constant(a.value());
}

// ---------------------------------------------------------------- reductions

template <typename T>
Var<T> sum(Var<T> a)
{
    Graph<T> &g = *a.graph;
    Tensor<T> out({1, 1}, a.value().mat().sum());
    return g.emit(std::move(out), {a}, [a](Graph<T> &g, const Tensor<T> &dy) {
        if (auto *ga = g.grad_slot(a))
            ga->mat().array() += dy[0];
    });
}

template <typename T>
Var<T> mean(Var<T> a)
{
    return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

/// Column-wise mean over rows: [r, c] -> [1, c].
template <typename T>
Var<T> mean_rows(Var<T> a)
{
    Graph<T> &g = *a.graph;
    const int r = a.rows();
    Tensor<T> out({1, a.cols()});
    out.mat() = a.value().mat().colwise().sum() / static_cast<T>(r);
    return g.emit(std::move(out), {a}, [a, r](Graph<T> &g, const Tensor<T> &dy) {
        if (auto *ga = g.grad_slot(a))
            ga->mat().rowwise() += dy.mat().row(0) / static_cast<T>(r);
    });
}

// ---------------------------------------------------------------- linear algebra

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b)
{
    detail::require_same_graph(a, b);
    if (a.cols() != b.rows() || a.shape().size() != 2 || b.shape().size() != 2)
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    Graph<T> &g = *a.graph;
    Tensor<T> out = Tensor<T>::matrix(a.rows(), b.cols());
    out.mat().noalias() = a.value().mat() * b.value().mat();
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T> &g, const Tensor<T> &dy) {
        if (auto *ga = g.grad_slot(a))
            ga->mat().noalias() += dy.mat() * g.value(b).mat().transpose();
        if (auto *gb = g.grad_slot(b))
            gb->mat().noalias() += g.value(a).mat().transpose() * dy.mat();
    });
}

/// Adds a [1, c] row vector to every row of a.
template <typename T>
Var<T> add_rowvec(Var<T> a, Var<T> b)
{
    detail::require_same_graph(a, b);
    if (b.rows() != 1 || b.cols() != a.cols())
        throw ShapeError("add_rowvec: bias " + shape_str(b.shape()) + " does not fit " + shape_str(a.shape()));
    Graph<T> &g = *a.graph;
    Tensor<T> out = a.value();
    out.mat().rowwise() += b.value().mat().row(0);
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T> &g, const Tensor<T> &dy) {
        detail::add_into(g.grad_slot(a), dy);
        if (auto *gb = g.grad_slot(b))
            gb->mat().row(0) += dy.mat().colwise().sum();
    });
}

/// x W + b, with b optional (pass an invalid Var to skip).
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b)
{
    Var<T> y = matmul(x, w);
    return b.valid() ? add_rowvec(y, b) : y;
}

// ---------------------------------------------------------------- indexing

/// Selects rows by index: out[i] = a[idx[i]].
template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<int> idx)
{
    Graph<T> &g = *a.graph;
    const int c = a.cols();
    const int r = a.rows();
    Tensor<T> out = Tensor<T>::matrix(static_cast<int>(idx.size()), c);
    for (std::size_t i = 0; i < idx.size(); ++i)
    {
        if (idx[i] < 0 || idx[i] >= r)
            throw std::out_of_range("gather_rows: index " + std::to_string(idx[i]) + " outside [0," + std::to_string(r) + ")");
        std::copy_n(a.value().row(idx[i]), c, out.row(static_cast<int>(i)));
    }
    return g.emit(std::move(out), {a}, [a, idx = std::move(idx), c](Graph<T> &g, const Tensor<T> &dy) {
        auto *ga = g.grad_slot(a);
        if (!ga)
            return;
        for (std::size_t i = 0; i < idx.size(); ++i)
        {
            T *dst = ga->row(idx[i]);
            const T *src = dy.row(static_cast<int>(i));
            for (int j = 0; j < c; ++j)
                dst[j] += src[j];
        }
    });
}

/// Builds a [total_rows, c] sequence: rows listed in idx take the matching row
/// of `visible`, every other row is a copy of `fill` ([1, c]).
template <typename T>
Var<T> merge_rows(Var<T> visible, const std::vector<int> &idx, Var<T> fill, int total_rows)
{
    detail::require_same_graph(visible, fill);
    const int c = visible.cols();
    if (fill.rows() != 1 || fill.cols() != c)
        throw ShapeError("merge_rows: fill " + shape_str(fill.shape()) + " does not match width " + std::to_string(c));
    if (static_cast<int>(idx.size()) != visible.rows())
        throw ShapeError("merge_rows: index count differs from visible rows");
    std::vector<int> source(static_cast<std::size_t>(total_rows), -1);
    for (std::size_t i = 0; i < idx.size(); ++i)
    {
        if (idx[i] < 0 || idx[i] >= total_rows)
            throw std::out_of_range("merge_rows: index out of range");
        if (source[static_cast<std::size_t>(idx[i])] != -1)
            throw std::invalid_argument("merge_rows: index collision at row " + std::to_string(idx[i]));
        source[static_cast<std::size_t>(idx[i])] = static_cast<int>(i);
    }
    Graph<T> &g = *visible.graph;
    Tensor<T> out = Tensor<T>::matrix(total_rows, c);
    for (int r = 0; r < total_rows; ++r)
    {
        const int s = source[static_cast<std::size_t>(r)];
        std::copy_n(s >= 0 ? visible.value().row(s) : fill.value().row(0), c, out.row(r));
    }
    return g.emit(std::move(out), {visible, fill},
                  [visible, fill, source = std::move(source), c](Graph<T> &g, const Tensor<T> &dy) {
                      auto *gv = g.grad_slot(visible);
                      auto *gf = g.grad_slot(fill);
                      for (std::size_t r = 0; r < source.size(); ++r)
                      {
                          const int s = source[r];
                          T *dst = s >= 0 ? (gv ? gv->row(s) : nullptr) : (gf ? gf->row(0) : nullptr);
                          if (!dst)
                              continue;
                          const T *src = dy.row(static_cast<int>(r));
                          for (int j = 0; j < c; ++j)
                              dst[j] += src[j];
                      }
                  });
}

// ---------------------------------------------------------------- normalization

/// Row-wise softmax, stabilized by subtracting the row max.
template <typename T>
Var<T> softmax_lastdim(Var<T> a)
{
    Graph<T> &g = *a.graph;
    Tensor<T> out = a.value();
    auto m = out.mat();
    for (int r = 0; r < m.rows(); ++r)
    {
        auto row = m.row(r).array();
        row = (row - row.maxCoeff()).exp();
        row /= row.sum();
    }
    Tensor<T> saved = out;
    return g.emit(std::move(out), {a}, [a, y = std::move(saved)](Graph<T> &g, const Tensor<T> &dy) {
        auto *ga = g.grad_slot(a);
        if (!ga)
            return;
        const auto ym = y.mat();
        const auto dm = dy.mat();
        for (int r = 0; r < ym.rows(); ++r)
        {
            const T dot = (ym.row(r).array() * dm.row(r).array()).sum();
            ga->mat().row(r).array() += ym.row(r).array() * (dm.row(r).array() - dot);
        }
    });
}

/// Layer normalization over the last axis with gain/bias of shape [1, c].
/// Uses the population variance.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5))
{
    detail::require_same_graph(x, gain);
    detail::require_same_graph(x, bias);
    const int c = x.cols();
    if (gain.cols() != c || bias.cols() != c || gain.rows() != 1 || bias.rows() != 1)
        throw ShapeError("layer_norm: gain/bias must be [1," + std::to_string(c) + "]");
    Graph<T> &g = *x.graph;
    const int r = x.rows();
    Tensor<T> xhat = Tensor<T>::matrix(r, c);
    std::vector<T> inv_std(static_cast<std::size_t>(r));
    const auto xm = x.value().mat();
    for (int i = 0; i < r; ++i)
    {
        const T mu = xm.row(i).mean();
        const T var = (xm.row(i).array() - mu).square().mean();
        inv_std[static_cast<std::size_t>(i)] = T(1) / std::sqrt(var + eps);
        xhat.mat().row(i) = (xm.row(i).array() - mu) * inv_std[static_cast<std::size_t>(i)];
    }
    Tensor<T> out = xhat;
    out.mat().array().rowwise() *= gain.value().mat().row(0).array();
    out.mat().rowwise() += bias.value().mat().row(0);
    return g.emit(std::move(out), {x, gain, bias},
                  [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), c](Graph<T> &g, const Tensor<T> &dy) {
                      const auto xh = xhat.mat();
                      const auto dm = dy.mat();
                      if (auto *gg = g.grad_slot(gain))
                          gg->mat().row(0) += (dm.array() * xh.array()).colwise().sum().matrix();
                      if (auto *gb = g.grad_slot(bias))
                          gb->mat().row(0) += dm.colwise().sum();
                      auto *gx = g.grad_slot(x);
                      if (!gx)
                          return;
                      const auto gv = g.value(gain).mat().row(0).array();
                      for (int i = 0; i < xh.rows(); ++i)
                      {
                          const auto dxh = (dm.row(i).array() * gv).eval();
                          const T m1 = dxh.mean();
                          const T m2 = (dxh * xh.row(i).array()).mean();
                          gx->mat().row(i).array() +=
                              inv_std[static_cast<std::size_t>(i)] * (dxh - m1 - xh.row(i).array() * m2);
                      }
                      (void)c;
                  });
}

// ---------------------------------------------------------------- attention

/// Partition of a token sequence into independent attention groups.
/// Token m of group g sits at row g * group_stride + m * member_stride.
struct AttentionGroups
{
    int groups = 1;
    int group_size = 1;
    int group_stride = 0;
    int member_stride = 1;

    int token(int g, int m) const { return g * group_stride + m * member_stride; }
    int num_tokens() const { return groups * group_size; }

    /// All tokens attend to each other.
    static AttentionGroups joint(int n) { return {1, n, 0, 1}; }
    /// Rectangular rows x cols grid stored row-major; attention along each column
    /// (across rows at a fixed column).
    static AttentionGroups along_rows(int rows, int cols) { return {cols, rows, 1, cols}; }
    /// Attention within each row (across columns at a fixed row).
    static AttentionGroups within_rows(int rows, int cols) { return {rows, cols, cols, 1}; }
};

/// Multi-head scaled dot-product attention, evaluated independently in each
/// group. q, k, v: [N, d] with N = groups * group_size; d divisible by heads.
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, AttentionGroups groups, int heads)
{
    detail::require_same_shape("attention", q, k);
    detail::require_same_shape("attention", q, v);
    const int d = q.cols();
    const int n = groups.group_size;
    if (heads < 1 || d % heads != 0)
        throw ShapeError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
    if (groups.num_tokens() != q.rows())
        throw ShapeError("attention: grouping covers " + std::to_string(groups.num_tokens()) + " tokens, input has " +
                         std::to_string(q.rows()));
    const int dh = d / heads;
    const T scale_factor = T(1) / std::sqrt(static_cast<T>(dh));
    Graph<T> &g = *q.graph;
    const bool keep = g.grad_enabled() && (g.requires_grad(q) || g.requires_grad(k) || g.requires_grad(v));

    Tensor<T> out = Tensor<T>::matrix(q.rows(), d);
    // Saved probabilities laid out [group][head][n][n].
    Tensor<T> probs = keep ? Tensor<T>({groups.groups * heads * n, n}) : Tensor<T>();
    RowMat<T> qg(n, d), kg(n, d), vg(n, d), og(n, d), s(n, n);

    auto gather = [&](const Tensor<T> &src, RowMat<T> &dst, int grp) {
        for (int m = 0; m < n; ++m)
            std::copy_n(src.row(groups.token(grp, m)), d, dst.row(m).data());
    };

    const auto &qv = q.value();
    const auto &kv = k.value();
    const auto &vv = v.value();
    for (int grp = 0; grp < groups.groups; ++grp)
    {
        gather(qv, qg, grp);
        gather(kv, kg, grp);
        gather(vv, vg, grp);
        for (int h = 0; h < heads; ++h)
        {
            s.noalias() = qg.middleCols(h * dh, dh) * kg.middleCols(h * dh, dh).transpose();
            s *= scale_factor;
            for (int r = 0; r < n; ++r)
            {
                auto row = s.row(r).array();
                row = (row - row.maxCoeff()).exp();
                row /= row.sum();
            }
            og.middleCols(h * dh, dh).noalias() = s * vg.middleCols(h * dh, dh);
            if (keep)
                MatMap<T>(probs.row((grp * heads + h) * n), n, n) = s;
        }
        for (int m = 0; m < n; ++m)
            std::copy_n(og.row(m).data(), d, out.row(groups.token(grp, m)));
    }
    attention_mac_counter() += static_cast<std::uint64_t>(groups.groups) * heads * 2ull * n * n * dh;

    return g.emit(std::move(out), {q, k, v},
                  [q, k, v, groups, heads, probs = std::move(probs), scale_factor](Graph<T> &g, const Tensor<T> &dy) {
                      const int d = g.value(q).cols();
                      const int n = groups.group_size;
                      const int dh = d / heads;
                      auto *gq = g.grad_slot(q);
                      auto *gk = g.grad_slot(k);
                      auto *gv = g.grad_slot(v);
                      RowMat<T> qg(n, d), kg(n, d), vg(n, d), dog(n, d), dq(n, d), dk(n, d), dv(n, d);
                      RowMat<T> da(n, n), ds(n, n);
                      auto gather = [&](const Tensor<T> &src, RowMat<T> &dst, int grp) {
                          for (int m = 0; m < n; ++m)
                              std::copy_n(src.row(groups.token(grp, m)), d, dst.row(m).data());
                      };
                      auto scatter_add = [&](Tensor<T> *dst, const RowMat<T> &src, int grp) {
                          if (!dst)
                              return;
                          for (int m = 0; m < n; ++m)
                          {
                              T *row = dst->row(groups.token(grp, m));
                              for (int j = 0; j < d; ++j)
                                  row[j] += src(m, j);
                          }
                      };
                      for (int grp = 0; grp < groups.groups; ++grp)
                      {
                          gather(g.value(q), qg, grp);
                          gather(g.value(k), kg, grp);
                          gather(g.value(v), vg, grp);
                          gather(dy, dog, grp);
                          for (int h = 0; h < heads; ++h)
                          {
                              ConstMatMap<T> a(probs.row((grp * heads + h) * n), n, n);
                              const auto doh = dog.middleCols(h * dh, dh);
                              dv.middleCols(h * dh, dh).noalias() = a.transpose() * doh;
                              da.noalias() = doh * vg.middleCols(h * dh, dh).transpose();
                              for (int r = 0; r < n; ++r)
                              {
                                  const T dot = (da.row(r).array() * a.row(r).array()).sum();
                                  ds.row(r).array() = a.row(r).array() * (da.row(r).array() - dot);
                              }
                              ds *= scale_factor;
                              dq.middleCols(h * dh, dh).noalias() = ds * kg.middleCols(h * dh, dh);
                              dk.middleCols(h * dh, dh).noalias() = ds.transpose() * qg.middleCols(h * dh, dh);
                          }
                          scatter_add(gq, dq, grp);
                          scatter_add(gk, dk, grp);
                          scatter_add(gv, dv, grp);
                      }
                  });
}

// ---------------------------------------------------------------- losses

/// Mean softmax cross-entropy over rows; labels[i] indexes the class of row i.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::vector<int> labels)
{
    const int r = logits.rows();
    const int c = logits.cols();
    if (static_cast<int>(labels.size()) != r)
        throw ShapeError("cross_entropy: label count differs from rows");
    Graph<T> &g = *logits.graph;
    Tensor<T> probs = logits.value();
    T loss = 0;
    for (int i = 0; i < r; ++i)
    {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= c)
            throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0," + std::to_string(c) + ")");
        auto row = probs.mat().row(i).array();
        const T mx = row.maxCoeff();
        const T lse = mx + std::log((row - mx).exp().sum());
        loss += lse - row(y);
        row = (row - lse).exp();
    }
    Tensor<T> out({1, 1}, loss / static_cast<T>(r));
    return g.emit(std::move(out), {logits},
                  [logits, labels = std::move(labels), probs = std::move(probs), r](Graph<T> &g, const Tensor<T> &dy) {
                      auto *gl = g.grad_slot(logits);
                      if (!gl)
                          return;
                      const T s = dy[0] / static_cast<T>(r);
                      for (int i = 0; i < r; ++i)
                      {
                          gl->mat().row(i) += s * probs.mat().row(i);
                          gl->at(i, labels[static_cast<std::size_t>(i)]) -= s;
                      }
                  });
}

/// Mean over the listed rows of the squared L2 distance to a constant target.
/// `target` rows align with `rows`.
template <typename T>
Var<T> row_sq_error_mean(Var<T> pred, const Tensor<T> &target)
{
    if (pred.shape() != target.shape())
        throw ShapeError("row_sq_error_mean: prediction " + shape_str(pred.shape()) + " vs target " +
                         shape_str(target.shape()));
    if (pred.rows() < 1)
        throw std::invalid_argument("row_sq_error_mean: empty row set");
    Graph<T> &g = *pred.graph;
    Var<T> diff = sub(pred, g.constant(target));
    return scale(sum(square(diff)), T(1) / static_cast<T>(pred.rows()));
}

} // namespace pilotmae::tc

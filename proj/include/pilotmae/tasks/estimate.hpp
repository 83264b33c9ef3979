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
#include "pilotmae/tasks/metrics.hpp"

#include <Eigen/Dense>

#include <set>

namespace pilotmae::tasks {

using chan::cdouble;
using chan::cfloat;

/// Pilot-only view of one sample, shared by every estimator so they all see
/// the same noise draw. Values are in P_ref-normalized units.
template <typename Scalar>
struct PilotObservation
{
    grid::Observation<Scalar> obs;
    grid::PilotPattern pattern;
    std::vector<cdouble> Y; ///< T*S*F grid, noisy at pilot REs, zero elsewhere
    double sigma2_rel = 0;  ///< noise variance relative to the clean pilot power
    int T = 0, S = 0, F = 0;
};

template <typename T>
PilotObservation<T> observe_pilots(const chan::ChannelSample &s, double pref, const grid::PatchConfig &pc,
                                   const grid::PilotPattern &pattern, double snr_db, std::mt19937_64 &rng)
{
    PilotObservation<T> po;
    po.pattern = pattern;
    po.T = s.T;
    po.S = s.S;
    po.F = s.F;
    po.obs = grid::observe<T>(s, pref, pc, grid::build_pilot_mask(pc, pattern), snr_db, rng);
    po.sigma2_rel = std::isinf(snr_db) ? 0.0 : std::pow(10.0, -snr_db / 10.0);
    po.Y.assign(s.H.size(), cdouble(0, 0));
    const int E = pc.patch_elems();
    for (std::size_t r = 0; r < po.obs.visible_idx.size(); ++r)
    {
        const T *row = po.obs.visible.row(static_cast<int>(r));
        for (int e = 0; e < E; ++e)
            po.Y[grid::grid_offset(pc, po.obs.visible_idx[r], e)] = cdouble(row[e], row[E + e]);
    }
    return po;
}

struct EstimatorOutput
{
    std::string method;
    double snr_db = 0;
    std::vector<cfloat> H; ///< T*S*F, physical units
};

namespace detail {

inline std::vector<cfloat> to_physical(const std::vector<cdouble> &Hn, double pref)
{
    const double g = std::sqrt(pref);
    std::vector<cfloat> out(Hn.size());
    for (std::size_t i = 0; i < Hn.size(); ++i)
    {
        if (!std::isfinite(Hn[i].real()) || !std::isfinite(Hn[i].imag()))
            throw tc::NonFiniteError("estimator produced a non-finite value");
        out[i] = cfloat(static_cast<float>(Hn[i].real() * g), static_cast<float>(Hn[i].imag() * g));
    }
    return out;
}

/// Linear interpolation at x from samples (xs[i], ys[i]), xs sorted; constant
/// extension beyond the end points.
inline cdouble interp1(const std::vector<int> &xs, const std::vector<cdouble> &ys, int x)
{
    if (x <= xs.front())
        return ys.front();
    if (x >= xs.back())
        return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin()), lo = hi - 1;
    const double w = static_cast<double>(x - xs[lo]) / (xs[hi] - xs[lo]);
    return (1.0 - w) * ys[lo] + w * ys[hi];
}

inline void require_pilot_axes(const grid::PilotPattern &p)
{
    if (p.symbols.size() < 2 || p.subcarriers.size() < 2)
        throw std::invalid_argument("estimator: need at least two pilot symbols and two pilot subcarriers");
    if (!std::is_sorted(p.symbols.begin(), p.symbols.end()) || !std::is_sorted(p.subcarriers.begin(), p.subcarriers.end()))
        throw std::invalid_argument("estimator: pilot indices must be sorted");
}

} // namespace detail

/// Per antenna: interpolate across frequency at each pilot symbol, then across time.
inline std::vector<cdouble> interpolate_linear(const std::vector<cdouble> &Y, int T, int S, int F,
                                               const grid::PilotPattern &p)
{
    detail::require_pilot_axes(p);
    const auto idx = [&](int t, int s, int f) { return (static_cast<std::size_t>(t) * S + s) * F + f; };
    std::vector<cdouble> H(Y.size());
    std::vector<cdouble> ys;
    for (int s = 0; s < S; ++s)
    {
        for (int t : p.symbols)
        {
            ys.clear();
            for (int f : p.subcarriers)
                ys.push_back(Y[idx(t, s, f)]);
            for (int f = 0; f < F; ++f)
                H[idx(t, s, f)] = detail::interp1(p.subcarriers, ys, f);
        }
        for (int f = 0; f < F; ++f)
        {
            ys.clear();
            for (int t : p.symbols)
                ys.push_back(H[idx(t, s, f)]);
            for (int t = 0; t < T; ++t)
                H[idx(t, s, f)] = detail::interp1(p.symbols, ys, t);
        }
    }
    return H;
}

template <typename T>
EstimatorOutput estimate_linear(const PilotObservation<T> &po, double pref)
{
    return {"linear", po.obs.snr_db, detail::to_physical(interpolate_linear(po.Y, po.T, po.S, po.F, po.pattern), pref)};
}

/// Per-axis second-order statistics, each scaled to unit mean diagonal.
struct KroneckerStats
{
    Eigen::MatrixXcd R_t, R_f;
};

/// Sample covariances along time and frequency, with every sample scaled to
/// unit mean power first.
inline KroneckerStats estimate_kronecker_stats(const std::vector<chan::ChannelSample> &samples)
{
    if (samples.empty())
        throw std::invalid_argument("kronecker stats: no samples");
    const int T = samples[0].T, S = samples[0].S, F = samples[0].F;
    KroneckerStats st;
    st.R_t = Eigen::MatrixXcd::Zero(T, T);
    st.R_f = Eigen::MatrixXcd::Zero(F, F);
    Eigen::VectorXcd v;
    for (const auto &smp : samples)
    {
        if (smp.T != T || smp.S != S || smp.F != F)
            throw std::invalid_argument("kronecker stats: samples differ in shape");
        const double pw = smp.mean_power();
        if (!(pw > 0))
            continue;
        const double g = 1.0 / pw;
        for (int s = 0; s < S; ++s)
        {
            v.resize(F);
            for (int t = 0; t < T; ++t)
            {
                for (int f = 0; f < F; ++f)
                    v(f) = cdouble(smp.at(t, s, f));
                st.R_f.noalias() += g * v * v.adjoint();
            }
            v.resize(T);
            for (int f = 0; f < F; ++f)
            {
                for (int t = 0; t < T; ++t)
                    v(t) = cdouble(smp.at(t, s, f));
                st.R_t.noalias() += g * v * v.adjoint();
            }
        }
    }
    st.R_t /= st.R_t.diagonal().real().mean();
    st.R_f /= st.R_f.diagonal().real().mean();
    return st;
}

inline constexpr double kLmmseRidge = 1e-8;

struct AxisFilter
{
    Eigen::MatrixXcd W;       ///< n x |pilots|
    Eigen::VectorXd residual; ///< per-output error variance (relative units)
};

/// W = R[:,p] (R[p,p] + diag(noise) + ridge I)^-1 and the diagonal of R - W R[p,:].
inline AxisFilter lmmse_axis_filter(const Eigen::MatrixXcd &R, const std::vector<int> &pilots, const Eigen::VectorXd &noise)
{
    const int n = static_cast<int>(R.rows()), k = static_cast<int>(pilots.size());
    Eigen::MatrixXcd Rpp(k, k), Rap(n, k);
    for (int j = 0; j < k; ++j)
    {
        for (int i = 0; i < k; ++i)
            Rpp(i, j) = R(pilots[static_cast<std::size_t>(i)], pilots[static_cast<std::size_t>(j)]);
        Rap.col(j) = R.col(pilots[static_cast<std::size_t>(j)]);
        Rpp(j, j) += noise(j) + kLmmseRidge;
    }
    AxisFilter af;
    af.W = Rpp.ldlt().solve(Rap.adjoint()).adjoint();
    af.residual.resize(n);
    for (int i = 0; i < n; ++i)
        af.residual(i) = std::max(0.0, (R(i, i) - af.W.row(i).cwiseProduct(Rap.row(i).conjugate()).sum()).real());
    return af;
}

/// Sequential LMMSE: frequency filter at pilot symbols, then a time filter per
/// subcarrier whose noise term is the residual variance of the first stage.
/// Antennas are filtered independently.
inline std::vector<cdouble> lmmse_sequential(const std::vector<cdouble> &Y, int T, int S, int F,
                                             const grid::PilotPattern &p, const KroneckerStats &st, double sigma2_rel)
{
    detail::require_pilot_axes(p);
    if (st.R_t.rows() != T || st.R_f.rows() != F)
        throw std::invalid_argument("lmmse: statistics do not match the grid");
    const auto idx = [&](int t, int s, int f) { return (static_cast<std::size_t>(t) * S + s) * F + f; };
    const int kt = static_cast<int>(p.symbols.size()), kf = static_cast<int>(p.subcarriers.size());
    const AxisFilter ff = lmmse_axis_filter(st.R_f, p.subcarriers, Eigen::VectorXd::Constant(kf, sigma2_rel));
    std::vector<AxisFilter> tf;
    tf.reserve(static_cast<std::size_t>(F));
    for (int f = 0; f < F; ++f)
        tf.push_back(lmmse_axis_filter(st.R_t, p.symbols, Eigen::VectorXd::Constant(kt, ff.residual(f))));

    std::vector<cdouble> H(Y.size());
    Eigen::VectorXcd y(kf), z(kt);
    Eigen::MatrixXcd Hp(kt, F);
    for (int s = 0; s < S; ++s)
    {
        for (int a = 0; a < kt; ++a)
        {
            for (int j = 0; j < kf; ++j)
                y(j) = Y[idx(p.symbols[static_cast<std::size_t>(a)], s, p.subcarriers[static_cast<std::size_t>(j)])];
            Hp.row(a) = (ff.W * y).transpose();
        }
        for (int f = 0; f < F; ++f)
        {
            z = Hp.col(f);
            const Eigen::VectorXcd h = tf[static_cast<std::size_t>(f)].W * z;
            for (int t = 0; t < T; ++t)
                H[idx(t, s, f)] = h(t);
        }
    }
    return H;
}

template <typename T>
EstimatorOutput estimate_lmmse(const PilotObservation<T> &po, double pref, const KroneckerStats &st,
                               const std::string &tag)
{
    return {tag, po.obs.snr_db,
            detail::to_physical(lmmse_sequential(po.Y, po.T, po.S, po.F, po.pattern, st, po.sigma2_rel), pref)};
}

/// Decoder readout: encoder on the pilot tokens, decoder over the full grid,
/// each predicted patch de-normalized with the decoder's (mean, log-variance)
/// head, then scaled by sqrt(P_ref). Pilot patches keep their observed values.
template <typename T>
EstimatorOutput estimate_decoder(const model::MaskedAutoencoder<T> &m, const PilotObservation<T> &po,
                                 int *clamped = nullptr)
{
    const auto &pc = m.config().patch;
    tc::Graph<T> g(false);
    auto enc = m.encoder().forward(g, g.constant(po.obs.visible), po.obs.mask);
    auto dec = m.decoder().forward(g, enc, po.obs.visible_idx);
    const auto &z = m.decoder().recon(g, dec).value();
    const auto &sc = m.decoder().scale(g, dec).value();
    tc::Tensor<T> patches({pc.P(), pc.D_p()});
    int neg = 0;
    for (int p = 0; p < pc.P(); ++p)
    {
        double var = std::exp(static_cast<double>(sc.at(p, 1))) - grid::kEpsScale;
        if (var < 0)
        {
            var = 0;
            ++neg;
        }
        const double mu = sc.at(p, 0), sd = std::sqrt(var + grid::kEpsRecon);
        for (int j = 0; j < pc.D_p(); ++j)
            patches.at(p, j) = static_cast<T>(mu + sd * static_cast<double>(z.at(p, j)));
    }
    for (std::size_t r = 0; r < po.obs.visible_idx.size(); ++r)
        std::copy_n(po.obs.visible.row(static_cast<int>(r)), pc.D_p(), patches.row(po.obs.visible_idx[r]));
    if (clamped)
        *clamped = neg;
    const auto Hn = grid::unpatchify(patches, pc);
    std::vector<cdouble> Hd(Hn.begin(), Hn.end());
    return {"decoder", po.obs.snr_db, detail::to_physical(Hd, m.pref)};
}

} // namespace pilotmae::tasks

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

#include "pilotmae/tasks/results.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace pilotmae::cli {

/// Line plot of mean vs SNR with one polyline per (method, input mode).
inline std::string results_svg(const std::vector<tasks::ResultRow> &rows, const std::string &title)
{
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto &r : rows)
    {
        if (!std::isfinite(r.mean))
            continue;
        series[r.method + " (" + r.input_mode + ")"].emplace_back(r.snr_db, r.mean);
        x0 = std::min(x0, r.snr_db);
        x1 = std::max(x1, r.snr_db);
        y0 = std::min(y0, r.mean);
        y1 = std::max(y1, r.mean);
    }
    if (series.empty())
        x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0)
        x1 = x0 + 1;
    if (y1 == y0)
        y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double W = 640, H = 420, L = 70, R = 200, Tm = 40, B = 50;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - Tm - B); };
    static const char *colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << L << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i)
    {
        const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << std::round(xv * 10) / 10
           << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << std::round(yv * 1000) / 1000
           << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">SNR (dB)</text>\n";
    int k = 0;
    for (auto &[name, pts] : series)
    {
        std::sort(pts.begin(), pts.end());
        const char *c = colors[k % 10];
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
        for (const auto &[x, y] : pts)
            os << px(x) << ',' << py(y) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << W - R + 10 << "\" y=\"" << Tm + 16 * k << "\" fill=\"" << c << "\">" << name << "</text>\n";
        ++k;
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_results_svg(const std::string &path, const std::vector<tasks::ResultRow> &rows, const std::string &title)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    os << results_svg(rows, title);
}

} // namespace pilotmae::cli

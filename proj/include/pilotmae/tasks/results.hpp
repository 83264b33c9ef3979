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

#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>
#include <vector>

namespace pilotmae::tasks {

struct ResultRow
{
    std::string task, method, input_mode;
    double snr_db = 0;
    std::string metric;
    double mean = 0, std = 0;
    int n = 0;
};

inline void write_results_csv(const std::string &path, const std::vector<ResultRow> &rows, const std::string &config_hash,
                              std::uint64_t seed)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    os << "task,method,input_mode,snr_db,metric,mean,std,n,config_hash,seed\n" << std::setprecision(9);
    for (const auto &r : rows)
        os << r.task << ',' << r.method << ',' << r.input_mode << ',' << r.snr_db << ',' << r.metric << ',' << r.mean << ','
           << r.std << ',' << r.n << ',' << config_hash << ',' << seed << '\n';
}

} // namespace pilotmae::tasks

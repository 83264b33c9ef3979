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
#include "pilotmae/profiler/flops.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <thread>

namespace pilotmae::prof {

struct CostReport
{
    std::string encoder, input_mode;
    std::size_t params = 0;
    double attention_flops = 0, total_flops = 0; ///< per sample
    double latency_mean_ms = 0, latency_std_ms = 0, latency_median_ms = 0; ///< per sample, amortized
    int batch = 0, repeats = 0;
    std::string hardware;
};

inline std::string hardware_string()
{
    std::ifstream is("/proc/cpuinfo");
    std::string line, model = "unknown cpu";
    while (std::getline(is, line))
        if (line.rfind("model name", 0) == 0)
        {
            const auto c = line.find(':');
            if (c != std::string::npos)
                model = line.substr(c + 2);
            break;
        }
    return model + " (" + std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " threads)";
}

struct LatencyConfig
{
    int batch = 32;
    int repeats = 100;
    int warmup = 5;
};

/// Times single-threaded encoder inference over a batch of prepared
/// observations. Each repeat runs the whole batch; per-sample latency is the
/// batch time divided by the batch size.
template <typename T>
CostReport measure_latency(const model::Encoder<T> &enc, const std::vector<grid::Observation<T>> &batch,
                           const LatencyConfig &cfg, const std::string &input_mode)
{
    if (batch.empty() || cfg.repeats < 1 || cfg.warmup < 0)
        throw std::invalid_argument("measure_latency: need a nonempty batch and at least one repeat");
    auto run = [&]() {
        for (const auto &ob : batch)
        {
            tc::Graph<T> g(false);
            auto h = enc.forward(g, g.constant(ob.visible), ob.mask);
            (void)h;
        }
    };
    for (int i = 0; i < cfg.warmup; ++i)
        run();
    std::vector<double> ms(static_cast<std::size_t>(cfg.repeats));
    for (auto &m : ms)
    {
        const auto t0 = std::chrono::steady_clock::now();
        run();
        m = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() /
            static_cast<double>(batch.size());
    }
    CostReport r;
    r.encoder = model::to_string(enc.config().encoder);
    r.input_mode = input_mode;
    r.batch = static_cast<int>(batch.size());
    r.repeats = cfg.repeats;
    r.hardware = hardware_string();
    const auto &mask = batch.front().mask;
    r.attention_flops = encoder_attention_flops(enc.config(), mask.n_k(), mask.n_sf());
    r.total_flops = encoder_flops(enc.config(), mask.n_k(), mask.n_sf());
    double sum = 0;
    for (double m : ms)
        sum += m;
    r.latency_mean_ms = sum / static_cast<double>(ms.size());
    double ss = 0;
    for (double m : ms)
        ss += (m - r.latency_mean_ms) * (m - r.latency_mean_ms);
    r.latency_std_ms = ms.size() > 1 ? std::sqrt(ss / static_cast<double>(ms.size() - 1)) : 0.0;
    std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2), ms.end());
    r.latency_median_ms = ms[ms.size() / 2];
    return r;
}

inline void write_cost_csv(const std::string &path, const std::vector<CostReport> &rows, const std::string &config_hash,
                           std::uint64_t seed)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    os << "encoder,input_mode,params,attention_flops,total_flops,latency_mean_ms,latency_std_ms,latency_median_ms,batch,"
          "repeats,hardware,config_hash,seed\n"
       << std::setprecision(9);
    for (const auto &r : rows)
        os << r.encoder << ',' << r.input_mode << ',' << r.params << ',' << r.attention_flops << ',' << r.total_flops << ','
           << r.latency_mean_ms << ',' << r.latency_std_ms << ',' << r.latency_median_ms << ',' << r.batch << ','
           << r.repeats << ",\"" << r.hardware << "\"," << config_hash << ',' << seed << '\n';
}

class LockError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Exclusive marker file held for the duration of a benchmark.
class BenchmarkLock
{
public:
    explicit BenchmarkLock(std::string path) : path_(std::move(path))
    {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw LockError("benchmark already running (lockfile " + path_ + " exists)");
        const std::string pid = std::to_string(::getpid()) + "\n";
        if (::write(fd, pid.data(), pid.size()) < 0)
        {
            ::close(fd);
            ::unlink(path_.c_str());
            throw LockError("cannot write lockfile " + path_);
        }
        ::close(fd);
    }
    BenchmarkLock(const BenchmarkLock &) = delete;
    BenchmarkLock &operator=(const BenchmarkLock &) = delete;
    ~BenchmarkLock() { ::unlink(path_.c_str()); }

private:
    std::string path_;
};

} // namespace pilotmae::prof

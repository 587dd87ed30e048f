// SPDX-License-Identifier: Apache-2.0
//
// nfsplit - near-field wideband THz channel estimation under beam-split
// Copyright (C) 2026 The nfsplit authors
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

#include "nfsplit/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nfsplit {

namespace {

void require(bool ok, const char* what)
{
    if (!ok) throw std::invalid_argument(std::string("SystemConfig: ") + what);
}

} // namespace

void SystemConfig::validate() const
{
    require(n_antennas >= 1, "n_antennas must be >= 1");
    require(carrier_hz > 0, "carrier_hz must be positive");
    require(bandwidth_hz >= 0 && bandwidth_hz < 2 * carrier_hz, "bandwidth_hz must lie in [0, 2 carrier_hz)");
    require(subcarriers >= 1, "subcarriers must be >= 1");
    require(pilots >= 1, "pilots must be >= 1");
    require(rf_chains >= 1, "rf_chains must be >= 1");
    require(users >= 1, "users must be >= 1");
    require(paths >= 1, "paths must be >= 1");
    require(k_abs_per_m >= 0, "k_abs_per_m must be >= 0");
    require(range_min_m > 0, "range_min_m must be positive");
    require(range_max_m >= range_min_m, "range_max_m must be >= range_min_m");
    require(range_max_m <= fraunhofer(), "range_max_m must not exceed the Fraunhofer distance");
    require(nlos_jitter_s >= 0, "nlos_jitter_s must be >= 0");
}

SystemConfig SystemConfig::paper()
{
    return SystemConfig{};
}

SystemConfig SystemConfig::desk()
{
    SystemConfig c;
    c.n_antennas = 64;
    c.subcarriers = 16;
    c.pilots = 16;
    const double scale = c.fraunhofer() / SystemConfig::paper().fraunhofer();
    c.range_min_m = 5.0 * scale;
    c.range_max_m = 30.0 * scale;
    return c;
}

ChannelTensor ChannelTensor::zeros(int users, int antennas, int subcarriers)
{
    ChannelTensor t;
    t.h.assign(static_cast<std::size_t>(users), Eigen::MatrixXcd::Zero(antennas, subcarriers));
    return t;
}

double path_gain_magnitude(double freq_hz, double range_m, double k_abs_per_m)
{
    return kSpeedOfLight / (4.0 * std::numbers::pi * freq_hz * range_m) * std::exp(-0.5 * k_abs_per_m * range_m);
}

void assign_gains(PathSpec& path, double phase, const SystemConfig& cfg)
{
    const Subcarriers sc = cfg.subcarrier_grid();
    path.gains.resize(sc.m_count);
    for (int m = 0; m < sc.m_count; ++m)
        path.gains[m] = std::polar(path_gain_magnitude(sc.freq(m), path.point.range_m, cfg.k_abs_per_m), phase);
}

UserPaths sample_user_paths(const SystemConfig& cfg, int L, double angle_lo, double angle_hi, Rng& rng)
{
    if (L < 1) throw std::invalid_argument("sample_user_paths: L must be >= 1");
    if (!(angle_hi > angle_lo)) throw std::invalid_argument("sample_user_paths: empty angle interval");
    UserPaths paths(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
        PathSpec& p = paths[static_cast<std::size_t>(l)];
        const double angle = uniform(rng, angle_lo, angle_hi);
        p.point.sin_doa = std::clamp(std::sin(angle), -kMaxSinDoa, kMaxSinDoa);
        p.point.range_m = uniform(rng, cfg.range_min_m, cfg.range_max_m);
        const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        p.delay_s = p.point.range_m / kSpeedOfLight;
        if (l > 0) p.delay_s += uniform(rng, 0.0, cfg.nlos_jitter_s);
        assign_gains(p, phase, cfg);
    }
    return paths;
}

Scenario sample_scenario(const SystemConfig& cfg, int L, std::uint64_t seed)
{
    cfg.validate();
    if (L < 1) throw std::invalid_argument("sample_scenario: L must be >= 1");
    Scenario s;
    s.seed = seed;
    s.users.reserve(static_cast<std::size_t>(cfg.users));
    for (int k = 0; k < cfg.users; ++k) {
        Rng rng(derive_seed(seed, {stream::scenario, static_cast<std::uint64_t>(k)}));
        s.users.push_back(sample_user_paths(cfg, L, -std::numbers::pi / 2, std::numbers::pi / 2, rng));
    }
    return s;
}

Eigen::MatrixXcd synthesize_user(const UserPaths& paths, const SystemConfig& cfg)
{
    const Geometry geom = cfg.geometry();
    const Subcarriers sc = cfg.subcarrier_grid();
    if (paths.empty()) throw std::invalid_argument("synthesize_user: no paths");
    const double norm = std::sqrt(double(cfg.n_antennas) / double(paths.size()));
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(cfg.n_antennas, sc.m_count);
    for (const PathSpec& p : paths) {
        if (p.gains.size() != sc.m_count)
            throw std::invalid_argument("synthesize_user: path gains do not match the subcarrier count");
        for (int m = 0; m < sc.m_count; ++m) {
            const double f = sc.freq(m);
            const std::complex<double> w =
                norm * p.gains[m] * std::polar(1.0, -2.0 * std::numbers::pi * p.delay_s * f);
            h.col(m) += w * steering_vector(p.point, f, geom, SteeringMode::exact);
        }
    }
    return h;
}

ChannelTensor synthesize_channel(const Scenario& scenario, const SystemConfig& cfg)
{
    ChannelTensor t;
    t.h.reserve(scenario.users.size());
    for (const UserPaths& u : scenario.users) t.h.push_back(synthesize_user(u, cfg));
    return t;
}

double mean_element_power(const ChannelTensor& tensor)
{
    double sum = 0;
    double count = 0;
    for (const auto& hk : tensor.h) {
        sum += hk.squaredNorm();
        count += double(hk.size());
    }
    return count > 0 ? sum / count : 0.0;
}

std::pair<ChannelTensor, double> normalize_for_snr(const ChannelTensor& tensor)
{
    const double power = mean_element_power(tensor);
    if (!(power > 0)) throw std::invalid_argument("normalize_for_snr: all-zero channel tensor");
    const double scale = 1.0 / std::sqrt(power);
    ChannelTensor out = tensor;
    for (auto& hk : out.h) hk *= scale;
    return {std::move(out), scale};
}

} // namespace nfsplit

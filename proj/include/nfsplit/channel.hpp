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

#ifndef NFSPLIT_CHANNEL_HPP
#define NFSPLIT_CHANNEL_HPP

#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nfsplit/random.hpp"
#include "nfsplit/wavefield.hpp"

namespace nfsplit {

using Point = PolarPoint<double>;
using Geometry = ArrayGeometry<double>;
using Subcarriers = SubcarrierGrid<double>;

// sin(85 deg): scenario directions and dictionary grids stay inside this.
inline const double kMaxSinDoa = std::sin(85.0 * std::numbers::pi / 180.0);

struct SystemConfig {
    int n_antennas = 256;          // N
    double carrier_hz = 300e9;     // f_c
    double bandwidth_hz = 30e9;    // B
    int subcarriers = 128;         // M
    int pilots = 8;                // P
    int rf_chains = 8;             // N_RF
    int users = 8;                 // K
    int paths = 3;                 // L
    double k_abs_per_m = 0.0033;
    double range_min_m = 5.0;
    double range_max_m = 30.0;
    double nlos_jitter_s = 10e-9;

    Geometry geometry() const { return Geometry::make(n_antennas, carrier_hz); }
    Subcarriers subcarrier_grid() const { return Subcarriers::make(carrier_hz, bandwidth_hz, subcarriers); }
    double fraunhofer() const { return fraunhofer_distance(geometry()); }

    // Throws std::invalid_argument naming the offending field.
    void validate() const;

    // N=256, M=128, P=8, ranges unif[5, 30] m.
    static SystemConfig paper();
    // N=64, M=16, P=16 with range bounds scaled by F / 32.768 m so that r/F
    // matches the paper-scale setting.
    static SystemConfig desk();
};

struct PathSpec {
    Point point;
    double delay_s = 0;
    Eigen::VectorXcd gains;  // one complex gain per subcarrier
};

using UserPaths = std::vector<PathSpec>;

struct Scenario {
    std::uint64_t seed = 0;
    std::vector<UserPaths> users;

    int user_count() const { return static_cast<int>(users.size()); }
};

// h[k] is N x M: column m is h_k[m].
struct ChannelTensor {
    std::vector<Eigen::MatrixXcd> h;

    int users() const { return static_cast<int>(h.size()); }
    int antennas() const { return h.empty() ? 0 : static_cast<int>(h.front().rows()); }
    int subcarriers() const { return h.empty() ? 0 : static_cast<int>(h.front().cols()); }

    static ChannelTensor zeros(int users, int antennas, int subcarriers);
};

// sqrt(E|alpha|^2) = c0 / (4 pi f r) * exp(-k_abs r / 2)
double path_gain_magnitude(double freq_hz, double range_m, double k_abs_per_m);

// Draws one user's paths with directions uniform in angle over
// [angle_lo, angle_hi) (radians), sin clipped to +-sin(85 deg).
UserPaths sample_user_paths(const SystemConfig& cfg, int L, double angle_lo, double angle_hi, Rng& rng);

// Fills per-subcarrier gains: magnitude from path_gain_magnitude times the
// path's common phase.
void assign_gains(PathSpec& path, double phase, const SystemConfig& cfg);

Scenario sample_scenario(const SystemConfig& cfg, int L, std::uint64_t seed);

// sqrt(N/L) sum_l alpha a_m(phi, r) exp(-j 2 pi tau f_m) with exact spherical
// steering at every subcarrier frequency.
Eigen::MatrixXcd synthesize_user(const UserPaths& paths, const SystemConfig& cfg);
ChannelTensor synthesize_channel(const Scenario& scenario, const SystemConfig& cfg);

// Scales the tensor to unit mean element power. Returns the applied factor.
std::pair<ChannelTensor, double> normalize_for_snr(const ChannelTensor& tensor);

double mean_element_power(const ChannelTensor& tensor);

} // namespace nfsplit

#endif // NFSPLIT_CHANNEL_HPP

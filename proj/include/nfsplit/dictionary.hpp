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

#ifndef NFSPLIT_DICTIONARY_HPP
#define NFSPLIT_DICTIONARY_HPP

#include <vector>

#include <Eigen/Dense>

#include "nfsplit/channel.hpp"

namespace nfsplit {

struct GridSpec {
    int q_angle = 256;
    int q_range = 10;
    double r_min_m = 3.0;

    // q_angle = N, q_range = 10, r_min scaled like the scenario ranges.
    static GridSpec for_config(const SystemConfig& cfg);
};

// Shared physical grid, range-major: point q = ir * q_angle + ia.
// Angles are uniform in sin over [-sin 85, sin 85]; ranges uniform in 1/r
// between 1/F and 1/r_min.
struct PhysicalGrid {
    std::vector<Point> points;
    int q_angle = 0;
    int q_range = 0;

    int size() const { return static_cast<int>(points.size()); }
    const Point& operator[](int q) const { return points[static_cast<std::size_t>(q)]; }
};

// Splits a total atom count into q_angle x q_range; throws when q_range does
// not divide Q or the angle count would drop below 2.
GridSpec factor_grid(int total_atoms, int q_range, double r_min_m);

PhysicalGrid build_physical_grid(const SystemConfig& cfg, const GridSpec& spec);

enum class DictionaryKind { nba, si_nearfield, si_farfield };
enum class Storage { eager, lazy };

// Per-subcarrier atom matrices C_m (N x Q), unit-norm columns. SI
// dictionaries store a single matrix shared by every subcarrier.
class Dictionary {
public:
    DictionaryKind kind() const { return kind_; }
    SteeringMode mode() const { return mode_; }
    Storage storage() const { return storage_; }
    const PhysicalGrid& grid() const { return grid_; }
    const Geometry& geometry() const { return geom_; }
    const Subcarriers& subcarriers() const { return subcarriers_; }

    int antennas() const { return geom_.n_antennas; }
    int size() const { return grid_.size(); }
    int subcarrier_count() const { return subcarriers_.m_count; }

    // eta used to interpret atoms of subcarrier m: eta_m for NBA, 1 for SI.
    double eta(int m) const;
    // Frequency at which the atoms of subcarrier m are evaluated.
    double atom_frequency(int m) const;

    // Column q of C_m, computed from the grid (valid in both storage modes).
    Eigen::VectorXcd atom(int m, int q) const;
    // C_m; only in eager storage.
    const Eigen::MatrixXcd& matrix(int m) const;
    // C_m by value in either storage mode.
    Eigen::MatrixXcd materialize(int m) const;

    // Physical point of atom q (m-independent).
    const Point& physical_point(int q) const { return grid_[q]; }
    // Spatial location (phi_{m,q}, r_{m,q}) the atom represents at subcarrier m.
    // Computed by the raw map, so it may fall outside |phi| < 1.
    Point spatial_label(int m, int q) const;

    friend Dictionary build_nba(const PhysicalGrid&, const SystemConfig&, SteeringMode, Storage);
    friend Dictionary build_si_nearfield(const PhysicalGrid&, const SystemConfig&, SteeringMode, Storage);
    friend Dictionary build_si_farfield(const SystemConfig&, int, Storage);

private:
    DictionaryKind kind_ = DictionaryKind::nba;
    SteeringMode mode_ = SteeringMode::exact;
    Storage storage_ = Storage::eager;
    PhysicalGrid grid_;
    Geometry geom_;
    Subcarriers subcarriers_;
    std::vector<Eigen::MatrixXcd> atoms_;
};

// Beam-split-aware dictionary: atom (q, m) is the steering vector of the
// physical grid point q evaluated at subcarrier frequency f_m, so one support
// index describes the same physical location on every subcarrier.
Dictionary build_nba(const PhysicalGrid& grid, const SystemConfig& cfg,
                     SteeringMode mode = SteeringMode::exact, Storage storage = Storage::eager);

// Subcarrier-independent near-field atoms built at f_c.
Dictionary build_si_nearfield(const PhysicalGrid& grid, const SystemConfig& cfg,
                              SteeringMode mode = SteeringMode::exact, Storage storage = Storage::eager);

// Subcarrier-independent far-field atoms at f_c over q_angle directions.
Dictionary build_si_farfield(const SystemConfig& cfg, int q_angle, Storage storage = Storage::eager);

// |c_i^H c_j| for atoms of subcarrier m.
double coherence(const Dictionary& dict, int m, int i, int j);

} // namespace nfsplit

#endif // NFSPLIT_DICTIONARY_HPP

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

#include "nfsplit/dictionary.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nfsplit {

GridSpec GridSpec::for_config(const SystemConfig& cfg)
{
    GridSpec s;
    s.q_angle = cfg.n_antennas;
    s.q_range = 10;
    s.r_min_m = 3.0 * cfg.fraunhofer() / SystemConfig::paper().fraunhofer();
    return s;
}

GridSpec factor_grid(int total_atoms, int q_range, double r_min_m)
{
    if (q_range < 1 || total_atoms % q_range != 0 || total_atoms / q_range < 2)
        throw std::invalid_argument("factor_grid: cannot split " + std::to_string(total_atoms) + " atoms into "
                                    + std::to_string(q_range) + " ranges of >= 2 angles");
    return GridSpec{total_atoms / q_range, q_range, r_min_m};
}

PhysicalGrid build_physical_grid(const SystemConfig& cfg, const GridSpec& spec)
{
    const double F = cfg.fraunhofer();
    if (spec.q_angle < 2) throw std::invalid_argument("build_physical_grid: q_angle must be >= 2");
    if (spec.q_range < 1) throw std::invalid_argument("build_physical_grid: q_range must be >= 1");
    if (!(spec.r_min_m > 0) || !(spec.r_min_m < F))
        throw std::invalid_argument("build_physical_grid: r_min must lie in (0, F)");

    PhysicalGrid g;
    g.q_angle = spec.q_angle;
    g.q_range = spec.q_range;
    g.points.reserve(static_cast<std::size_t>(spec.q_angle) * static_cast<std::size_t>(spec.q_range));
    const double inv_lo = 1.0 / F;
    const double inv_hi = 1.0 / spec.r_min_m;
    for (int ir = 0; ir < spec.q_range; ++ir) {
        const double t = spec.q_range == 1 ? 0.0 : double(ir) / double(spec.q_range - 1);
        // the far end is pinned to F exactly
        const double r = ir == 0 ? F : 1.0 / (inv_lo + t * (inv_hi - inv_lo));
        for (int ia = 0; ia < spec.q_angle; ++ia) {
            const double s = -kMaxSinDoa + 2.0 * kMaxSinDoa * double(ia) / double(spec.q_angle - 1);
            g.points.push_back({s, r});
        }
    }
    return g;
}

double Dictionary::eta(int m) const
{
    return kind_ == DictionaryKind::nba ? subcarriers_.eta(m) : 1.0;
}

double Dictionary::atom_frequency(int m) const
{
    return kind_ == DictionaryKind::nba ? subcarriers_.freq(m) : subcarriers_.carrier_hz;
}

Eigen::VectorXcd Dictionary::atom(int m, int q) const
{
    return steering_vector(grid_[q], atom_frequency(m), geom_, mode_);
}

const Eigen::MatrixXcd& Dictionary::matrix(int m) const
{
    if (storage_ != Storage::eager) throw std::logic_error("Dictionary::matrix: lazy dictionary, use materialize()");
    return atoms_.size() == 1 ? atoms_.front() : atoms_[static_cast<std::size_t>(m)];
}

Eigen::MatrixXcd Dictionary::materialize(int m) const
{
    if (storage_ == Storage::eager) return matrix(m);
    return steering_matrix<double>(grid_.points, atom_frequency(m), geom_, mode_);
}

Point Dictionary::spatial_label(int m, int q) const
{
    const Point& p = grid_[q];
    const double e = eta(m);
    if (e == 1.0) return p;
    const double phi = p.sin_doa;
    const double factor = (1.0 - e * e * phi * phi) / (e * (1.0 - phi * phi));
    return {e * phi, factor * p.range_m};
}

Dictionary build_nba(const PhysicalGrid& grid, const SystemConfig& cfg, SteeringMode mode, Storage storage)
{
    cfg.validate();
    if (grid.size() == 0) throw std::invalid_argument("build_nba: empty grid");
    Dictionary d;
    d.kind_ = DictionaryKind::nba;
    d.mode_ = mode;
    d.storage_ = storage;
    d.grid_ = grid;
    d.geom_ = cfg.geometry();
    d.subcarriers_ = cfg.subcarrier_grid();
    if (storage == Storage::eager) {
        d.atoms_.reserve(static_cast<std::size_t>(d.subcarriers_.m_count));
        for (int m = 0; m < d.subcarriers_.m_count; ++m)
            d.atoms_.push_back(steering_matrix<double>(grid.points, d.subcarriers_.freq(m), d.geom_, mode));
    }
    return d;
}

Dictionary build_si_nearfield(const PhysicalGrid& grid, const SystemConfig& cfg, SteeringMode mode, Storage storage)
{
    cfg.validate();
    if (grid.size() == 0) throw std::invalid_argument("build_si_nearfield: empty grid");
    Dictionary d;
    d.kind_ = DictionaryKind::si_nearfield;
    d.mode_ = mode;
    d.storage_ = storage;
    d.grid_ = grid;
    d.geom_ = cfg.geometry();
    d.subcarriers_ = cfg.subcarrier_grid();
    if (storage == Storage::eager)
        d.atoms_.push_back(steering_matrix<double>(grid.points, cfg.carrier_hz, d.geom_, mode));
    return d;
}

Dictionary build_si_farfield(const SystemConfig& cfg, int q_angle, Storage storage)
{
    cfg.validate();
    if (q_angle < 2) throw std::invalid_argument("build_si_farfield: q_angle must be >= 2");
    PhysicalGrid grid;
    grid.q_angle = q_angle;
    grid.q_range = 1;
    for (int ia = 0; ia < q_angle; ++ia) {
        const double s = -kMaxSinDoa + 2.0 * kMaxSinDoa * double(ia) / double(q_angle - 1);
        grid.points.push_back({s, std::numeric_limits<double>::infinity()});
    }
    Dictionary d;
    d.kind_ = DictionaryKind::si_farfield;
    d.mode_ = SteeringMode::far_field;
    d.storage_ = storage;
    d.grid_ = std::move(grid);
    d.geom_ = cfg.geometry();
    d.subcarriers_ = cfg.subcarrier_grid();
    if (storage == Storage::eager)
        d.atoms_.push_back(steering_matrix<double>(d.grid_.points, cfg.carrier_hz, d.geom_, d.mode_));
    return d;
}

double coherence(const Dictionary& dict, int m, int i, int j)
{
    return std::abs(dict.atom(m, i).dot(dict.atom(m, j)));
}

} // namespace nfsplit

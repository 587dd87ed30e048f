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

#ifndef NFSPLIT_WAVEFIELD_HPP
#define NFSPLIT_WAVEFIELD_HPP

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nfsplit {

// 3e8 m/s reproduces the quoted Fraunhofer distances (32.768 m for N=256 at 300 GHz).
inline constexpr double kSpeedOfLight = 3.0e8;

template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Raised when a direction/range pair leaves the region where the
// physical <-> spatial maps are defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Uniform linear array with half-wavelength spacing at the carrier.
// Aperture is N*d so the Fraunhofer distance of a 256-element array at
// 300 GHz is 32.768 m.
template <typename Scalar = double>
struct ArrayGeometry {
    int n_antennas = 0;
    Scalar carrier_hz = 0;
    Scalar spacing_m = 0;
    Scalar aperture_m = 0;

    static ArrayGeometry make(int n, Scalar carrier_hz)
    {
        if (n < 1) throw std::invalid_argument("ArrayGeometry: n_antennas must be >= 1");
        if (!(carrier_hz > 0)) throw std::invalid_argument("ArrayGeometry: carrier must be positive");
        ArrayGeometry g;
        g.n_antennas = n;
        g.carrier_hz = carrier_hz;
        g.spacing_m = Scalar(kSpeedOfLight) / (Scalar(2) * carrier_hz);
        g.aperture_m = Scalar(n) * g.spacing_m;
        return g;
    }

    Scalar wavelength() const { return Scalar(kSpeedOfLight) / carrier_hz; }
};

// Subcarrier frequencies f_m = f_c + (B/M)(m - 1 - (M-1)/2), stored 0-based,
// together with eta_m = f_c / f_m.
template <typename Scalar = double>
struct SubcarrierGrid {
    int m_count = 0;
    Scalar carrier_hz = 0;
    Scalar bandwidth_hz = 0;
    RealVector<Scalar> freqs_hz;
    RealVector<Scalar> etas;

    static SubcarrierGrid make(Scalar carrier_hz, Scalar bandwidth_hz, int m_count)
    {
        if (m_count < 1) throw std::invalid_argument("SubcarrierGrid: m_count must be >= 1");
        if (!(bandwidth_hz >= 0)) throw std::invalid_argument("SubcarrierGrid: bandwidth must be >= 0");
        if (!(bandwidth_hz < 2 * carrier_hz)) throw std::invalid_argument("SubcarrierGrid: bandwidth must be < 2 f_c");
        SubcarrierGrid s;
        s.m_count = m_count;
        s.carrier_hz = carrier_hz;
        s.bandwidth_hz = bandwidth_hz;
        s.freqs_hz.resize(m_count);
        s.etas.resize(m_count);
        const Scalar step = bandwidth_hz / Scalar(m_count);
        const Scalar centre = Scalar(m_count - 1) / Scalar(2);
        for (int m = 0; m < m_count; ++m) {
            s.freqs_hz[m] = carrier_hz + step * (Scalar(m) - centre);
            s.etas[m] = carrier_hz / s.freqs_hz[m];
        }
        return s;
    }

    Scalar freq(int m) const { return freqs_hz[m]; }
    Scalar eta(int m) const { return etas[m]; }
};

// (phi, r) with phi = sin of the direction of arrival. An infinite range is
// the far-field limit.
template <typename Scalar = double>
struct PolarPoint {
    Scalar sin_doa = 0;
    Scalar range_m = 1;

    bool far_field() const { return std::isinf(range_m); }
};

enum class SteeringMode { exact, fresnel, far_field };

template <typename Scalar>
struct BeamSplitDelta {
    Scalar doa = 0;
    Scalar range = 0;
};

template <typename Scalar>
Scalar fraunhofer_distance(const ArrayGeometry<Scalar>& geom)
{
    return Scalar(2) * geom.aperture_m * geom.aperture_m / geom.wavelength();
}

// Distance from the point to antenna n (1-based, antenna 1 at the origin).
template <typename Scalar>
Scalar exact_antenna_range(const PolarPoint<Scalar>& p, int n, const ArrayGeometry<Scalar>& geom)
{
    const Scalar x = Scalar(n - 1) * geom.spacing_m;
    const Scalar r = p.range_m;
    return std::sqrt(r * r + x * x - Scalar(2) * r * x * p.sin_doa);
}

template <typename Scalar>
Scalar fresnel_antenna_range(const PolarPoint<Scalar>& p, int n, const ArrayGeometry<Scalar>& geom)
{
    const Scalar x = Scalar(n - 1) * geom.spacing_m;
    const Scalar zeta = (Scalar(1) - p.sin_doa * p.sin_doa) / (Scalar(2) * p.range_m);
    return p.range_m - x * p.sin_doa + x * x * zeta;
}

namespace detail {

// r^(n) - r, the path-length difference relative to the array origin.
template <typename Scalar>
Scalar range_offset(const PolarPoint<Scalar>& p, int n, const ArrayGeometry<Scalar>& geom, SteeringMode mode)
{
    const Scalar x = Scalar(n - 1) * geom.spacing_m;
    if (mode == SteeringMode::far_field || p.far_field()) return -x * p.sin_doa;
    if (mode == SteeringMode::fresnel) {
        const Scalar zeta = (Scalar(1) - p.sin_doa * p.sin_doa) / (Scalar(2) * p.range_m);
        return -x * p.sin_doa + x * x * zeta;
    }
    // (r^(n))^2 - r^2 = x^2 - 2 r x phi; dividing by (r^(n) + r) avoids the
    // cancellation of subtracting two nearly equal ranges.
    const Scalar num = x * x - Scalar(2) * p.range_m * x * p.sin_doa;
    return num / (exact_antenna_range(p, n, geom) + p.range_m);
}

} // namespace detail

// Unit-norm steering vector with entries exp(-j 2 pi f/c0 (r^(n) - r)) / sqrt(N).
// The common phase exp(-j 2 pi f r / c0) is left to the path gain.
template <typename Scalar>
ComplexVector<Scalar> steering_vector(const PolarPoint<Scalar>& p, Scalar freq_hz,
                                      const ArrayGeometry<Scalar>& geom,
                                      SteeringMode mode = SteeringMode::exact)
{
    const int N = geom.n_antennas;
    const Scalar k = Scalar(2) * std::numbers::pi_v<Scalar> * freq_hz / Scalar(kSpeedOfLight);
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(N));
    ComplexVector<Scalar> a(N);
    for (int n = 1; n <= N; ++n)
        a[n - 1] = std::polar(scale, -k * detail::range_offset(p, n, geom, mode));
    return a;
}

// One steering vector per point, stacked as columns.
template <typename Scalar>
ComplexMatrix<Scalar> steering_matrix(std::span<const PolarPoint<Scalar>> points, Scalar freq_hz,
                                      const ArrayGeometry<Scalar>& geom,
                                      SteeringMode mode = SteeringMode::exact)
{
    ComplexMatrix<Scalar> A(geom.n_antennas, static_cast<Eigen::Index>(points.size()));
    for (std::size_t q = 0; q < points.size(); ++q)
        A.col(static_cast<Eigen::Index>(q)) = steering_vector(points[q], freq_hz, geom, mode);
    return A;
}

// Location (eta*phi, r (1 - eta^2 phi^2) / (eta (1 - phi^2))) where a beam
// built at f_c for the physical point focuses at the subcarrier with ratio eta.
template <typename Scalar>
PolarPoint<Scalar> spatial_from_physical(const PolarPoint<Scalar>& p, Scalar eta)
{
    if (!(eta > 0)) throw DomainError("spatial_from_physical: eta must be positive");
    const Scalar phi = p.sin_doa;
    const Scalar phi_bar = eta * phi;
    if (!(std::abs(phi) < 1))
        throw DomainError("spatial_from_physical: endfire direction |phi| = 1 has no range map");
    if (!(std::abs(phi_bar) < 1))
        throw DomainError("spatial_from_physical: |eta*phi| >= 1 leaves the visible region");
    const Scalar factor = (Scalar(1) - phi_bar * phi_bar) / (eta * (Scalar(1) - phi * phi));
    return {phi_bar, factor * p.range_m};
}

template <typename Scalar>
PolarPoint<Scalar> physical_from_spatial(const PolarPoint<Scalar>& p_bar, Scalar eta)
{
    if (!(eta > 0)) throw DomainError("physical_from_spatial: eta must be positive");
    const Scalar phi_bar = p_bar.sin_doa;
    const Scalar phi = phi_bar / eta;
    if (!(std::abs(phi_bar) < 1) || !(std::abs(phi) < 1))
        throw DomainError("physical_from_spatial: direction outside the open visible region");
    const Scalar factor = eta * (Scalar(1) - phi * phi) / (Scalar(1) - phi_bar * phi_bar);
    return {phi, factor * p_bar.range_m};
}

// Near-field beam-split of the physical point at ratio eta.
template <typename Scalar>
BeamSplitDelta<Scalar> nb_deltas(const PolarPoint<Scalar>& p, Scalar eta)
{
    const Scalar phi = p.sin_doa;
    const Scalar factor = (Scalar(1) - eta * eta * phi * phi) / (eta * (Scalar(1) - phi * phi)) - Scalar(1);
    BeamSplitDelta<Scalar> d;
    d.doa = (eta - Scalar(1)) * phi;
    d.range = (factor == Scalar(0)) ? Scalar(0) : factor * p.range_m;
    return d;
}

// sin(pi N x) / (N sin(pi x)), continuous at integer x.
template <typename Scalar>
Scalar dirichlet_sinc(Scalar x, int N)
{
    if (N < 1) throw std::invalid_argument("dirichlet_sinc: N must be >= 1");
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar s = std::sin(pi * x);
    if (std::abs(s) < Scalar(1e-9)) {
        const Scalar k = std::round(x);
        const Scalar eps = x - k;
        const long long ik = static_cast<long long>(k);
        const Scalar sign = ((ik * (N - 1)) % 2 == 0) ? Scalar(1) : Scalar(-1);
        const Scalar nn = Scalar(N) * Scalar(N);
        return sign * (Scalar(1) - pi * pi * (nn - Scalar(1)) * eps * eps / Scalar(6));
    }
    return std::sin(pi * Scalar(N) * x) / (Scalar(N) * s);
}

// |u^H v_m|^2 with u built at f_c for the physical point and v_m built at f_m
// for the spatial point. Both vectors are unit norm, so this is the usual
// |sum|^2 / N^2.
template <typename Scalar>
Scalar array_gain(const PolarPoint<Scalar>& p_physical, const PolarPoint<Scalar>& p_spatial, int m,
                  const SubcarrierGrid<Scalar>& grid, const ArrayGeometry<Scalar>& geom,
                  SteeringMode mode = SteeringMode::fresnel)
{
    const ComplexVector<Scalar> u = steering_vector(p_physical, grid.carrier_hz, geom, mode);
    const ComplexVector<Scalar> v = steering_vector(p_spatial, grid.freq(m), geom, mode);
    return std::norm(u.dot(v));
}

} // namespace nfsplit

#endif // NFSPLIT_WAVEFIELD_HPP

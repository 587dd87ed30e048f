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

#include <doctest.h>

#include <cmath>

#include "nfsplit/dictionary.hpp"

using namespace nfsplit;

namespace {

SystemConfig with_antennas(int N)
{
    SystemConfig c = SystemConfig::desk();
    c.n_antennas = N;
    c.range_min_m = 0.1;
    c.range_max_m = 0.2;
    return c;
}

} // namespace

TEST_CASE("build_physical_grid")
{
    const SystemConfig paper = SystemConfig::paper();

    SUBCASE("three angles, one range")
    {
        const PhysicalGrid g = build_physical_grid(paper, GridSpec{3, 1, 3.0});
        REQUIRE(g.size() == 3);
        CHECK(g[0].sin_doa == -kMaxSinDoa);
        CHECK(g[1].sin_doa == 0.0);
        CHECK(g[2].sin_doa == kMaxSinDoa);
        for (const Point& p : g.points) CHECK(p.range_m == paper.fraunhofer());
    }

    SUBCASE("paper default")
    {
        const GridSpec spec = GridSpec::for_config(paper);
        CHECK(spec.q_angle == 256);
        CHECK(spec.q_range == 10);
        CHECK(spec.r_min_m == doctest::Approx(3.0));
        const PhysicalGrid g = build_physical_grid(paper, spec);
        CHECK(g.size() == 2560);
        const double F = paper.fraunhofer();
        double rmin = 1e9, rmax = 0;
        for (const Point& p : g.points) {
            rmin = std::min(rmin, p.range_m);
            rmax = std::max(rmax, p.range_m);
        }
        CHECK(rmax <= F);
        CHECK(rmax == F);
        CHECK(rmin == doctest::Approx(3.0).epsilon(1e-14));
        // angles strictly increasing inside each range ring, reciprocal
        // ranges evenly spaced across rings
        for (int ir = 0; ir < 10; ++ir)
            for (int ia = 1; ia < 256; ++ia) CHECK(g[ir * 256 + ia].sin_doa > g[ir * 256 + ia - 1].sin_doa);
        const double step = 1 / g[256].range_m - 1 / g[0].range_m;
        for (int ir = 2; ir < 10; ++ir)
            CHECK(1 / g[ir * 256].range_m - 1 / g[(ir - 1) * 256].range_m == doctest::Approx(step).epsilon(1e-10));
    }

    SUBCASE("factorisation")
    {
        const GridSpec s = factor_grid(2560, 10, 3.0);
        CHECK(s.q_angle == 256);
        CHECK_THROWS_AS(factor_grid(2561, 10, 3.0), std::invalid_argument);
        CHECK_THROWS_AS(factor_grid(10, 10, 3.0), std::invalid_argument);
        CHECK_THROWS_AS(build_physical_grid(paper, GridSpec{1, 10, 3.0}), std::invalid_argument);
        CHECK_THROWS_AS(build_physical_grid(paper, GridSpec{16, 10, 40.0}), std::invalid_argument);
    }
}

TEST_CASE("NBA dictionary")
{
    const SystemConfig cfg = SystemConfig::desk();
    const PhysicalGrid grid = build_physical_grid(cfg, GridSpec::for_config(cfg));
    const Dictionary nba = build_nba(grid, cfg);
    const Geometry geom = cfg.geometry();
    const Subcarriers sc = cfg.subcarrier_grid();
    REQUIRE(nba.size() == 640);
    REQUIRE(nba.subcarrier_count() == 16);

    SUBCASE("unit-norm atoms")
    {
        double worst = 0;
        for (int m = 0; m < 16; ++m)
            worst = std::max(worst, (nba.matrix(m).colwise().squaredNorm().array() - 1.0).abs().maxCoeff());
        CHECK(worst < 1e-12);
    }

    SUBCASE("atoms are steering at f_m of the physical point")
    {
        for (int m : {0, 5, 15})
            for (int q : {0, 77, 639})
                CHECK((nba.matrix(m).col(q) - steering_vector(grid[q], sc.freq(m), geom)).norm() == 0.0);
        // odd M: centre subcarrier sits at f_c
        SystemConfig odd = cfg;
        odd.subcarriers = 5;
        const Dictionary d5 = build_nba(grid, odd, SteeringMode::fresnel);
        for (int q : {3, 300})
            CHECK((d5.matrix(2).col(q) - steering_vector(grid[q], 300e9, geom, SteeringMode::fresnel)).norm() == 0.0);
        CHECK(d5.eta(2) == 1.0);
    }

    SUBCASE("on-grid matched-filter dominance for every subcarrier")
    {
        // h = sqrt(N) a_exact(f_m, grid[q]) = sqrt(N) C_m[:, q], so the
        // correlations against C_m are sqrt(N) times a Gram column.
        int dominated = 0;
        for (int m = 0; m < 16; ++m) {
            const Eigen::MatrixXd gram = (nba.matrix(m).adjoint() * nba.matrix(m)).cwiseAbs();
            for (int q = 0; q < 640; ++q) {
                Eigen::Index arg;
                gram.col(q).maxCoeff(&arg);
                dominated += arg == q;
                CHECK(gram(q, q) >= 0.98);
            }
        }
        CHECK(dominated == 16 * 640);
    }

    SUBCASE("lazy storage materialises the same atoms")
    {
        const Dictionary lazy = build_nba(grid, cfg, SteeringMode::exact, Storage::lazy);
        CHECK_THROWS_AS(lazy.matrix(0), std::logic_error);
        for (int m : {0, 9}) CHECK((lazy.materialize(m) - nba.matrix(m)).norm() == 0.0);
    }

    SUBCASE("spatial labels follow the beam-focus map")
    {
        const int q = 5 * 64 + 40;
        for (int m = 0; m < 16; ++m) {
            const Point s = nba.spatial_label(m, q);
            const Point ref = spatial_from_physical(grid[q], sc.eta(m));
            CHECK(s.sin_doa == doctest::Approx(ref.sin_doa).epsilon(1e-15));
            CHECK(s.range_m == doctest::Approx(ref.range_m).epsilon(1e-14));
        }
    }

    SUBCASE("zero bandwidth degenerates to the SI dictionary")
    {
        for (double B : {0.0, 1.0}) {
            SystemConfig narrow = cfg;
            narrow.bandwidth_hz = B;
            const Dictionary a = build_nba(grid, narrow);
            const Dictionary b = build_si_nearfield(grid, narrow);
            double worst = 0;
            for (int m = 0; m < 16; ++m)
                worst = std::max(worst, (a.matrix(m) - b.matrix(m)).cwiseAbs().maxCoeff());
            CHECK(worst < 1e-9);
        }
    }
}

TEST_CASE("baseline dictionaries")
{
    const SystemConfig cfg = SystemConfig::desk();
    const PhysicalGrid grid = build_physical_grid(cfg, GridSpec::for_config(cfg));
    const Dictionary nf = build_si_nearfield(grid, cfg);
    for (int m = 1; m < 16; ++m) CHECK(&nf.matrix(m) == &nf.matrix(0));
    CHECK(nf.eta(0) == 1.0);
    CHECK(nf.atom_frequency(3) == 300e9);

    const Dictionary ff = build_si_farfield(cfg, 64);
    CHECK(ff.size() == 64);
    CHECK(ff.mode() == SteeringMode::far_field);
    for (int q = 0; q < 64; ++q) CHECK(std::isinf(ff.physical_point(q).range_m));
    const Eigen::VectorXcd a = ff.atom(7, 10);
    // pure linear phase
    for (int n = 2; n < 64; ++n)
        CHECK(std::abs(a[n] * std::conj(a[n - 1]) - a[1] * std::conj(a[0])) < 1e-12);
}

TEST_CASE("coherence")
{
    const SystemConfig cfg = SystemConfig::desk();
    const Dictionary d = build_nba(build_physical_grid(cfg, GridSpec::for_config(cfg)), cfg);
    CHECK(coherence(d, 3, 17, 17) == doctest::Approx(1.0).epsilon(1e-13));

    SUBCASE("decreases with the array size")
    {
        // Fixed points on the N=256 angle grid at a common range. Single
        // pairs sit on Dirichlet sidelobes that are not monotone in N, so
        // the sweep tracks the worst pair at >= 4 bins (the sidelobe
        // envelope).
        const double step = 2 * kMaxSinDoa / 255;
        PhysicalGrid pts;
        pts.q_range = 1;
        for (int i = -24; i <= 24; ++i) pts.points.push_back({i * step, 0.5});
        pts.q_angle = pts.size();
        double prev = 1;
        for (int N : {32, 64, 128, 256}) {
            const Dictionary dn = build_nba(pts, with_antennas(N));
            double worst = 0;
            for (int i = 0; i < pts.size(); ++i)
                for (int j = i + 4; j < pts.size(); ++j) worst = std::max(worst, coherence(dn, 8, i, j));
            CHECK(worst <= prev + 1e-12);
            prev = worst;
        }
        CHECK(prev < 0.3);
    }

    SUBCASE("mean off-diagonal coherence at N=64, Q=160")
    {
        const PhysicalGrid g = build_physical_grid(cfg, factor_grid(160, 10, GridSpec::for_config(cfg).r_min_m));
        const Dictionary d160 = build_nba(g, cfg);
        const Eigen::MatrixXd gram = (d160.matrix(8).adjoint() * d160.matrix(8)).cwiseAbs();
        const double off = (gram.sum() - gram.diagonal().sum()) / (160.0 * 159.0);
        CHECK(off < 0.5);
        for (int i = 0; i < 160; i += 13)
            for (int j = 0; j < 160; j += 7) CHECK(gram(i, j) == doctest::Approx(coherence(d160, 8, i, j)));
    }
}

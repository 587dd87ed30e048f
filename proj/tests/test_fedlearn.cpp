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
#include <filesystem>
#include <fstream>
#include <numbers>

#include "nfsplit/fedlearn.hpp"

using namespace nfsplit;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

LocalDataset synthetic(const Mlp& net, Eigen::Index count, std::uint64_t seed)
{
    LocalDataset d;
    d.pilots = net.inputs() / 3;
    d.inputs = gaussian(net.inputs(), count, seed);
    d.labels = gaussian(net.outputs(), count, seed + 1000);
    return d;
}

std::filesystem::path temp_file(const char* name)
{
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("Mlp architecture")
{
    const SystemConfig desk = SystemConfig::desk();
    // 48 -> 128 -> 128 -> 128: (48*128 + 128) + (128*128 + 128) + (128*128 + 128)
    CHECK(Mlp::for_config(desk, {128, 128}).parameter_count() == 6272 + 16512 + 16512);
    // 48 -> 1024 -> 1024 -> 128: 50176 + 1049600 + 131200
    CHECK(Mlp::for_config(desk).parameter_count() == 1230976);
    CHECK(Mlp(4, {}, 2).parameter_count() == 10);
    CHECK_THROWS_AS(Mlp(4, {0}, 2), std::invalid_argument);

    const Mlp net(6, {5, 4}, 3);
    const Eigen::VectorXd x = gaussian(6, 1, 1);
    CHECK(model_forward(net, Eigen::VectorXd::Zero(net.parameter_count()), x).norm() == 0.0);

    // doubling the output layer (weights and bias) doubles the output
    const Eigen::VectorXd theta = net.init(3) + 0.1 * gaussian(net.parameter_count(), 1, 4);
    Eigen::VectorXd doubled = theta;
    const Eigen::Index tail = 3 * 4 + 3;
    doubled.tail(tail) *= 2.0;
    CHECK((model_forward(net, doubled, x) - 2.0 * model_forward(net, theta, x)).norm() < 1e-14);
}

TEST_CASE("local gradient")
{
    const Mlp net(6, {5, 4}, 3);
    REQUIRE(net.parameter_count() < 1000);
    const Eigen::VectorXd theta = net.init(7) + 0.05 * gaussian(net.parameter_count(), 1, 8);
    const LocalDataset d = synthetic(net, 40, 9);

    SUBCASE("central differences")
    {
        const auto [loss, grad] = net.loss_and_gradient(theta, d.inputs, d.labels);
        CHECK(loss == doctest::Approx(net.loss(theta, d.inputs, d.labels)).epsilon(1e-14));
        Rng rng(10);
        std::uniform_int_distribution<Eigen::Index> pick(0, net.parameter_count() - 1);
        double worst = 0;
        for (int t = 0; t < 20; ++t) {
            const Eigen::Index i = pick(rng);
            Eigen::VectorXd a = theta, b = theta;
            a[i] += 1e-5;
            b[i] -= 1e-5;
            const double fd = (net.loss(a, d.inputs, d.labels) - net.loss(b, d.inputs, d.labels)) / 2e-5;
            worst = std::max(worst, std::abs(fd - grad[i]) / std::max(std::abs(grad[i]), 1e-6));
        }
        CHECK(worst < 1e-4);
    }

    SUBCASE("stationary at a perfect fit")
    {
        LocalDataset fit = d;
        fit.labels = net.forward(theta, d.inputs);
        CHECK(net.loss_and_gradient(theta, fit.inputs, fit.labels).second.norm() < 1e-8);
    }

    SUBCASE("pooled gradient is the size-weighted mean")
    {
        const LocalDataset e = synthetic(net, 25, 11);
        Eigen::MatrixXd X(6, 65), Y(3, 65);
        X << d.inputs, e.inputs;
        Y << d.labels, e.labels;
        const Eigen::VectorXd gd = net.loss_and_gradient(theta, d.inputs, d.labels).second;
        const Eigen::VectorXd ge = net.loss_and_gradient(theta, e.inputs, e.labels).second;
        const Eigen::VectorXd gp = net.loss_and_gradient(theta, X, Y).second;
        CHECK((gp - (40.0 * gd + 25.0 * ge) / 65.0).norm() < 1e-13 * gp.norm());
    }

    SUBCASE("dropout is seeded and training-only")
    {
        Rng r1(5), r2(5);
        const auto a = net.loss_and_gradient(theta, d.inputs, d.labels, 0.5, &r1);
        const auto b = net.loss_and_gradient(theta, d.inputs, d.labels, 0.5, &r2);
        CHECK(a.second == b.second);
        CHECK(a.second != net.loss_and_gradient(theta, d.inputs, d.labels).second);
        CHECK_THROWS_AS(net.loss_and_gradient(theta, d.inputs, d.labels, 0.5), std::invalid_argument);
    }

    CHECK_THROWS_AS(net.loss_and_gradient(theta, Eigen::MatrixXd(6, 0), Eigen::MatrixXd(3, 0)), std::invalid_argument);
}

TEST_CASE("federated averaging")
{
    const Mlp net(6, {8}, 3);
    const Eigen::VectorXd theta = net.init(1);
    const Eigen::VectorXd g = gaussian(net.parameter_count(), 1, 2);

    const std::vector<Eigen::VectorXd> zeros(3, Eigen::VectorXd::Zero(net.parameter_count()));
    CHECK(fedavg_round(theta, zeros, 0.1) == theta);
    const std::vector<Eigen::VectorXd> one{g};
    CHECK((fedavg_round(theta, one, 0.1) - (theta - 0.1 * g)).norm() < 1e-15);

    SUBCASE("equals centralised gradient descent")
    {
        std::vector<LocalDataset> local;
        for (std::uint64_t k = 0; k < 4; ++k) local.push_back(synthetic(net, 30, 40 + k));
        Eigen::MatrixXd X(6, 120), Y(3, 120);
        for (int k = 0; k < 4; ++k) {
            X.middleCols(30 * k, 30) = local[k].inputs;
            Y.middleCols(30 * k, 30) = local[k].labels;
        }
        TrainOptions opt;
        opt.rounds = 50;
        opt.lr = 0.01;
        const TrainResult fl = train(net, theta, local, opt);
        Eigen::VectorXd gd = theta;
        for (int t = 0; t < 50; ++t) gd -= 0.01 * net.loss_and_gradient(gd, X, Y).second;
        CHECK((fl.theta - gd).cwiseAbs().maxCoeff() <= 1e-10 * gd.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("train")
{
    const Mlp net(6, {8}, 3);
    const Eigen::VectorXd theta = net.init(1);
    std::vector<LocalDataset> local{synthetic(net, 30, 1), synthetic(net, 20, 2)};
    TrainOptions opt;
    opt.rounds = 5;
    opt.lr = 0;
    CHECK(train(net, theta, local, opt).theta == theta);

    opt.lr = 0.01;
    opt.batch_size = 8;
    const TrainResult a = train(net, theta, local, opt);
    const TrainResult b = train(net, theta, local, opt);
    CHECK(a.loss == b.loss);
    CHECK(a.theta == b.theta);
    CHECK(a.loss.size() == 5);

    opt.batch_size = 0;
    opt.lr = 1e4;
    opt.rounds = 50;
    CHECK_THROWS_AS(train(net, theta, local, opt), std::runtime_error);

    SUBCASE("convex linear model")
    {
        const Mlp lin(4, {}, 2);
        LocalDataset d = synthetic(lin, 200, 5);
        // Y = A X + noise, least-squares optimum in closed form
        const Eigen::MatrixXd A = gaussian(2, 4, 6);
        d.labels = A * d.inputs + 0.1 * gaussian(2, 200, 7);
        Eigen::MatrixXd Xa(5, 200);
        Xa << d.inputs, Eigen::RowVectorXd::Ones(200);
        const Eigen::MatrixXd Wb = (Xa * Xa.transpose()).ldlt().solve(Xa * d.labels.transpose()).transpose();
        const double best = (Wb * Xa - d.labels).squaredNorm() / 200;

        TrainOptions o;
        o.rounds = 400;
        o.lr = 0.05;
        const std::vector<LocalDataset> one{d};
        const TrainResult r = train(lin, Eigen::VectorXd::Zero(lin.parameter_count()), one, o);
        for (std::size_t t = 1; t < r.loss.size(); ++t) CHECK(r.loss[t] <= r.loss[t - 1] * (1 + 1e-12));
        CHECK(r.loss.back() >= best - 1e-12);
        CHECK(lin.loss(r.theta, d.inputs, d.labels) == doctest::Approx(best).epsilon(1e-6));
    }
}

TEST_CASE("overhead accounting")
{
    OverheadInputs in;
    in.samples.assign(8, 128000000);
    in.rf_chains = 8;
    in.labels = false;
    in.parameters = 1196928;
    in.rounds = 100;
    CHECK(overhead_cl(in) == 24576000000ull);
    CHECK(overhead_fl(in) == 1915084800ull);
    const double ratio = double(overhead_cl(in)) / double(overhead_fl(in));
    CHECK(ratio > 12.7);
    CHECK(ratio < 12.9);

    OverheadInputs other = in;
    other.antennas = 4096;
    CHECK(overhead_cl(other) == overhead_cl(in));

    OverheadInputs unit;
    unit.samples = {1};
    unit.rf_chains = 1;
    unit.antennas = 1;
    unit.labels = true;
    CHECK(overhead_cl(unit) == 5);

    OverheadInputs none = in;
    none.rounds = 0;
    CHECK(overhead_fl(none) == 0);
    OverheadInputs z2 = in, t3 = in, k2 = in;
    z2.parameters *= 2;
    t3.rounds *= 3;
    k2.samples.resize(16, 1);
    CHECK(overhead_fl(z2) == 2 * overhead_fl(in));
    CHECK(overhead_fl(t3) == 3 * overhead_fl(in));
    CHECK(overhead_fl(k2) == 2 * overhead_fl(in));
}

TEST_CASE("local datasets")
{
    SystemConfig cfg = SystemConfig::desk();
    const PhysicalGrid grid = build_physical_grid(cfg, GridSpec::for_config(cfg));

    SUBCASE("sizes")
    {
        SystemConfig one = cfg;
        one.subcarriers = 1;
        const Dictionary d1 = build_nba(grid, one);
        const OmpSolver s1(d1, make_pilot_matrix(one.pilots, one.n_antennas, 1));
        DatasetOptions opt;
        opt.scenarios = 1;
        opt.augment = 1;
        opt.snrs_db = {20};
        CHECK(dataset_size(one, opt) == 1);
        CHECK(build_dataset(one, opt, s1, 0, 5).count() == 1);
        opt.snrs_db.clear();
        CHECK_THROWS_AS(build_dataset(one, opt, s1, 0, 5), std::invalid_argument);
        DatasetOptions paper;
        paper.scenarios = 1000;
        paper.augment = 1000;
        CHECK(dataset_size(SystemConfig::paper(), paper) == 3LL * 128 * 1000000);
    }

    SUBCASE("sectors partition the half plane")
    {
        for (int k = 0; k < 8; ++k) {
            const auto [lo, hi] = user_sector(k, 8);
            CHECK(lo == doctest::Approx(-std::numbers::pi / 2 + std::numbers::pi * k / 8));
            CHECK(hi == doctest::Approx(-std::numbers::pi / 2 + std::numbers::pi * (k + 1) / 8));
        }
    }

    SUBCASE("contents")
    {
        const Dictionary nba = build_nba(grid, cfg);
        const OmpSolver solver(nba, make_pilot_matrix(cfg.pilots, cfg.n_antennas, 2));
        DatasetOptions opt;
        opt.scenarios = 3;
        opt.augment = 2;
        opt.keep_truth = true;
        const LocalDataset d = build_dataset(cfg, opt, solver, 3, 77);
        CHECK(d.count() == 3 * 16 * 3 * 2);
        CHECK(d.inputs.rows() == 48);
        CHECK(d.labels.rows() == 128);
        for (int c = 0; c < 3; ++c) {
            const auto block = d.inputs.middleRows(16 * c, 16);
            CHECK(std::abs(block.mean()) < 1e-12);
            CHECK((block.array() - block.mean()).square().mean() == doctest::Approx(1.0).epsilon(1e-12));
        }
        // undo the standardisation of the angle channel
        const Eigen::ArrayXXd ang = d.inputs.bottomRows(16).array() * d.stats.stdev[2] + d.stats.mean[2];
        CHECK(ang.minCoeff() > -std::numbers::pi - 1e-12);
        CHECK(ang.maxCoeff() <= std::numbers::pi + 1e-12);
        // labels are noise-free: identical for every SNR and augmentation
        CHECK((d.labels.col(5) - d.labels.col(5 + 16)).norm() == 0.0);
        CHECK((d.labels.col(5) - d.labels.col(5 + 16 * 5)).norm() == 0.0);
        CHECK(d.inputs.col(5) != d.inputs.col(5 + 16));
        CHECK(regression_nmse(d.labels, d.truth) < 0.5);
        const LocalDataset again = build_dataset(cfg, opt, solver, 3, 77);
        CHECK(again.inputs == d.inputs);
        CHECK(again.labels == d.labels);

        SUBCASE("binary round trip")
        {
            const auto path = temp_file("nfsplit_test_dataset.bin");
            write_dataset(path, d);
            const LocalDataset r = read_dataset(path);
            CHECK(r.owner == 3);
            CHECK(r.inputs == d.inputs);
            CHECK(r.labels == d.labels);
            CHECK(r.truth == d.truth);
            CHECK(r.stats.stdev == d.stats.stdev);
            CHECK_THROWS_AS(read_params(path), std::runtime_error);
            std::filesystem::remove(path);
        }
    }
}

TEST_CASE("parameter files")
{
    const Mlp net(9, {7, 5}, 4);
    const Eigen::VectorXd theta = net.init(3);
    const auto path = temp_file("nfsplit_test_params.bin");
    write_params(path, net, theta);
    const auto [n2, t2] = read_params(path);
    CHECK(n2.sizes() == net.sizes());
    CHECK(t2 == theta);
    {
        std::ifstream in(path, std::ios::binary);
        char tag[8];
        in.read(tag, 8);
        CHECK(std::string(tag, 8) == "NFSPARM1");
    }
    std::filesystem::resize_file(path, 40);
    CHECK_THROWS_AS(read_params(path), std::runtime_error);
    std::filesystem::remove(path);
}

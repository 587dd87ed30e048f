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

#ifndef NFSPLIT_FEDLEARN_HPP
#define NFSPLIT_FEDLEARN_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nfsplit/estimators.hpp"

namespace nfsplit {

// Fully-connected regression network: ReLU hidden layers, linear output.
// theta stores, layer by layer, W (out x in, column-major) then b (out).
class Mlp {
public:
    Mlp(int inputs, std::vector<int> hidden, int outputs);

    // 3P inputs, 2N outputs.
    static Mlp for_config(const SystemConfig& cfg, std::vector<int> hidden = {1024, 1024});

    int inputs() const { return sizes_.front(); }
    int outputs() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }
    Eigen::Index parameter_count() const { return count_; }

    // He-normal weights, zero biases.
    Eigen::VectorXd init(std::uint64_t seed) const;

    // Columns of X are samples.
    Eigen::MatrixXd forward(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X) const;

    // (1/D) sum_i ||f(x_i) - y_i||^2 and its gradient by reverse-mode
    // accumulation. With dropout > 0 hidden activations are masked
    // (inverted dropout) using rng.
    std::pair<double, Eigen::VectorXd> loss_and_gradient(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X,
                                                         const Eigen::MatrixXd& Y, double dropout = 0,
                                                         Rng* rng = nullptr) const;

    double loss(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const;

private:
    std::vector<int> sizes_;
    std::vector<Eigen::Index> offsets_;  // start of W_l; b_l follows
    Eigen::Index count_ = 0;
};

Eigen::VectorXd model_forward(const Mlp& net, const Eigen::VectorXd& theta, const Eigen::VectorXd& input);

// Per-channel (Re, Im, angle) standardisation of the P x 3 input blocks.
struct Standardizer {
    std::array<double, 3> mean{0, 0, 0};
    std::array<double, 3> stdev{1, 1, 1};

    static Standardizer fit(const Eigen::MatrixXd& raw, int pilots);
    // Element-wise mean of the users' statistics.
    static Standardizer average(std::span<const Standardizer> parts);
    void apply(Eigen::MatrixXd& inputs, int pilots) const;
};

// Columns are samples. inputs: 3P rows [Re y; Im y; arg y]; labels and truth:
// 2N rows [Re h; Im h].
struct LocalDataset {
    int owner = 0;
    int pilots = 0;
    Eigen::MatrixXd inputs;   // standardised with `stats`
    Eigen::MatrixXd labels;   // NBA-OMP estimate from noiseless sounding
    Eigen::MatrixXd truth;    // ground-truth channel; empty unless requested
    Standardizer stats;

    Eigen::Index count() const { return inputs.cols(); }
};

struct DatasetOptions {
    int scenarios = 25;                          // V realisations per user
    int augment = 8;                             // noise draws per realisation and SNR
    std::vector<double> snrs_db{15.0, 20.0, 25.0};
    int paths = 3;
    bool keep_truth = false;
};

// D_k = |snrs| * M * V * G
Eigen::Index dataset_size(const SystemConfig& cfg, const DatasetOptions& opt);

// User k draws its paths from the angular sector
// [-pi/2 + pi k / K, -pi/2 + pi (k+1) / K) (0-based k).
std::pair<double, double> user_sector(int k, int users);

// One local dataset per user. `solver` supplies the pilot matrix and the
// dictionary used for labelling.
LocalDataset build_dataset(const SystemConfig& cfg, const DatasetOptions& opt, const OmpSolver& solver, int user,
                           std::uint64_t seed);
std::vector<LocalDataset> build_datasets(const SystemConfig& cfg, const DatasetOptions& opt, const OmpSolver& solver,
                                         std::uint64_t seed);

// theta - lr * mean(gradients), unweighted.
Eigen::VectorXd fedavg_round(const Eigen::VectorXd& theta, std::span<const Eigen::VectorXd> gradients, double lr);

struct TrainOptions {
    int rounds = 100;
    double lr = 1e-3;
    int batch_size = 0;    // 0: full batch
    double dropout = 0.0;  // training-only, off by default
    std::uint64_t seed = 0;
};

struct TrainResult {
    Eigen::VectorXd theta;
    std::vector<double> loss;  // mean user loss at the start of each round
};

using RoundCallback = std::function<void(int round, const Eigen::VectorXd& theta, double loss)>;

// Throws std::runtime_error when the loss exceeds 1e6 x its initial value.
TrainResult train(const Mlp& net, Eigen::VectorXd theta0, std::span<const LocalDataset> datasets,
                  const TrainOptions& opt, const RoundCallback& on_round = {});

// sum ||f(x) - h||^2 / sum ||h||^2 over the columns.
double regression_nmse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

struct OverheadInputs {
    std::vector<std::uint64_t> samples;  // D_k
    std::uint64_t rf_chains = 8;         // N_RF
    std::uint64_t antennas = 256;        // N
    bool labels = false;                 // xi
    std::uint64_t parameters = 1196928;  // Z
    std::uint64_t rounds = 100;          // T

    std::uint64_t users() const { return samples.size(); }
};

// sum_k D_k (3 N_RF + xi 2N)
std::uint64_t overhead_cl(const OverheadInputs& in);
// 2 Z T K
std::uint64_t overhead_fl(const OverheadInputs& in);

// Flat binary files: 8-byte magic, uint64 dimensions, little-endian float64
// payload.
void write_dataset(const std::filesystem::path& path, const LocalDataset& data);
LocalDataset read_dataset(const std::filesystem::path& path);
void write_params(const std::filesystem::path& path, const Mlp& net, const Eigen::VectorXd& theta);
std::pair<Mlp, Eigen::VectorXd> read_params(const std::filesystem::path& path);

} // namespace nfsplit

#endif // NFSPLIT_FEDLEARN_HPP

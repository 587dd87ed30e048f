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

#ifndef NFSPLIT_HARNESS_HPP
#define NFSPLIT_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nfsplit/dictionary.hpp"
#include "nfsplit/fedlearn.hpp"
#include "nfsplit/io.hpp"

namespace nfsplit {

enum class Estimator { nba_omp, nf_omp, ff_omp, ls, lmmse };
enum class SweepAxis { none, snr, bandwidth };

std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);
std::string to_string(SweepAxis a);

struct GainMapSpec {
    double user_angle_deg = 45.0;
    double user_range_m = 6.0;
    std::vector<int> layers{};   // subcarrier indices; empty = all
    double x_min_m = 2.0, x_max_m = 7.0;
    double y_min_m = 2.0, y_max_m = 7.0;
    int nx = 201, ny = 201;
    // Users farther than far_field_factor * F are evaluated with plane waves.
    double far_field_factor = 10.0;
};

struct FlSpec {
    std::vector<int> hidden{1024, 1024};
    DatasetOptions data{};
    TrainOptions train{};
    int eval_samples = 200;
    double eval_snr_db = 20.0;
    int eval_every = 10;
    // Inputs of the reference overhead line (paper numbers).
    std::uint64_t ref_parameters = 1196928;
    std::uint64_t ref_rounds = 100;
    std::uint64_t ref_samples = 128000000;
};

struct ExperimentConfig {
    std::string profile = "paper";
    SystemConfig system = SystemConfig::paper();
    GridSpec grid = GridSpec::for_config(SystemConfig::paper());
    int ff_angles = 0;                 // far-field dictionary size; 0 = same atom count as the grid
    SweepAxis axis = SweepAxis::snr;
    std::vector<double> axis_values{0, 5, 10, 15, 20};  // dB, or B / f_c ratios
    double snr_db = 10.0;              // used when the axis is not SNR
    int trials = 100;
    std::vector<Estimator> estimators{Estimator::nba_omp, Estimator::nf_omp, Estimator::ff_omp, Estimator::ls,
                                      Estimator::lmmse};
    std::uint64_t seed = 1;
    int covariance_draws = 2000;
    int workers = 0;                   // 0 = hardware concurrency
    std::string output = "out";
    GainMapSpec gain_map{};
    FlSpec fl{};

    static ExperimentConfig desk();
    static ExperimentConfig paper();
    static ExperimentConfig profile_named(const std::string& name);

    // Throws std::invalid_argument naming the offending key.
    void validate() const;
    // System config at one sweep point.
    SystemConfig system_at(double axis_value) const;
    double snr_at(double axis_value) const;
};

io::json to_json(const ExperimentConfig& c);
// Keys absent from j keep the values of `base`. Unknown keys are errors.
ExperimentConfig experiment_from_json(const io::json& j, const ExperimentConfig& base);
ExperimentConfig load_experiment(const std::filesystem::path& path, const ExperimentConfig& base);

// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);
// "# nfsplit <version> <tool> config=<hash>"
std::string csv_banner(const ExperimentConfig& c, const std::string& tool);

// ---- NMSE sweeps ----------------------------------------------------------

struct TrialRecord {
    int point = 0;
    double axis_value = 0;
    int trial = 0;
    Estimator estimator = Estimator::nba_omp;
    double nmse = 0;
};

struct SweepRow {
    double axis_value = 0;
    Estimator estimator = Estimator::nba_omp;
    double mean = 0;
    double stdev = 0;
    int trials = 0;

    double mean_db() const;
};

struct SweepResult {
    std::vector<TrialRecord> records;  // point-major, then trial, then estimator
    std::vector<SweepRow> rows;        // point-major, then estimator

    const SweepRow& row(double axis_value, Estimator e) const;
};

// Seeds: scenario and pilots depend on (seed, trial) only, so every sweep
// point and estimator sees the same channels; noise depends on
// (seed, point, trial). Trials run on a worker pool, aggregation is in index
// order.
SweepResult run_nmse_sweep(const ExperimentConfig& cfg);

// Per-trial NMSE of every configured estimator at one sweep point.
std::vector<double> run_trial(const ExperimentConfig& cfg, int point, int trial);

void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& r);
void write_trials_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& r);

// ---- gain maps ------------------------------------------------------------

struct GainRow {
    std::string kind;  // cell | peak | focus | user
    int layer = 0;     // subcarrier index, -1 for the composite layer
    double x = 0, y = 0;
    double gain = 0;
};

struct GainMap {
    std::vector<int> layers;
    std::vector<GainRow> rows;
    bool far_field = false;

    // Argmax cell of one layer (-1 for the composite).
    const GainRow& peak(int layer) const;
};

// x along broadside, y along the array axis; the first antenna sits at the
// origin. A cell at (x, y) has range hypot(x, y) and sin_doa y / range.
Point polar_from_cartesian(double x, double y);
std::pair<double, double> cartesian_from_polar(const Point& p);

GainMap run_gain_map(const ExperimentConfig& cfg);
void write_gain_csv(std::ostream& out, const ExperimentConfig& cfg, const GainMap& g);

// ---- federated learning ---------------------------------------------------

struct FlRound {
    int round = 0;
    double train_loss = 0;
    std::optional<double> eval_nmse;
};

struct OverheadLine {
    std::string scope;  // model | reference
    OverheadInputs inputs;
    std::uint64_t cl = 0, fl = 0;
    double ratio() const { return fl ? double(cl) / double(fl) : 0.0; }
};

struct FlResult {
    std::vector<FlRound> rounds;
    double initial_eval_nmse = 0;
    double final_eval_nmse = 0;
    double label_nmse = 0;  // NBA-OMP labels of the held-out samples vs truth
    Eigen::Index parameters = 0;
    Eigen::Index samples_per_user = 0;
    Eigen::VectorXd theta;
    std::vector<OverheadLine> overhead;
};

std::vector<OverheadLine> overhead_report(const OverheadInputs& model, const OverheadInputs& reference);
OverheadInputs reference_overhead(const FlSpec& fl, int users, int rf_chains, int antennas);

FlResult run_fl_experiment(const ExperimentConfig& cfg);
void write_fl_csv(std::ostream& out, const ExperimentConfig& cfg, const FlResult& r);
void write_overhead_csv(std::ostream& out, const ExperimentConfig& cfg, const std::vector<OverheadLine>& lines);

} // namespace nfsplit

#endif // NFSPLIT_HARNESS_HPP

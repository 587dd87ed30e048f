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

// Command-line front end: nmse-sweep, gain-map, fl-train, overhead.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nfsplit/harness.hpp"

namespace fs = std::filesystem;
using namespace nfsplit;

namespace {

struct Common {
    std::string profile = "desk";
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--profile", c.profile, "Base profile")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--config", c.config, "JSON experiment config overlaid on the profile")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Base seed (overrides the config)");
    cmd->add_option("--out", c.out, "Output directory (overrides the config)");
}

ExperimentConfig resolve(const Common& c)
{
    ExperimentConfig cfg = ExperimentConfig::profile_named(c.profile);
    if (!c.config.empty()) cfg = load_experiment(c.config, cfg);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.output = c.out;
    cfg.validate();
    return cfg;
}

std::ofstream open_csv(const ExperimentConfig& cfg, const std::string& name)
{
    fs::create_directories(cfg.output);
    const fs::path p = fs::path(cfg.output) / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    std::cerr << "writing " << p.string() << '\n';
    return f;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"nfsplit - near-field wideband THz channel estimation experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(NFSPLIT_VERSION));

    Common sweep_opts, gain_opts, fl_opts, ovh_opts, show_opts;
    auto* sweep = app.add_subcommand("nmse-sweep", "Monte-Carlo NMSE sweep over SNR or bandwidth");
    add_common(sweep, sweep_opts);
    auto* gain = app.add_subcommand("gain-map", "Array-gain raster of a mismatched beam in Cartesian coordinates");
    add_common(gain, gain_opts);
    auto* fl = app.add_subcommand("fl-train", "Federated training on NBA-OMP labels plus overhead report");
    add_common(fl, fl_opts);

    auto* ovh = app.add_subcommand("overhead", "Centralised vs federated communication overhead");
    add_common(ovh, ovh_opts);
    std::uint64_t parameters = 1196928, rounds = 100, samples = 128000000, users = 8, rf = 8, antennas = 256;
    ovh->add_option("--parameters", parameters, "Model parameter count Z")->capture_default_str();
    ovh->add_option("--rounds", rounds, "Training rounds T")->capture_default_str();
    ovh->add_option("--samples", samples, "Samples per user D_k")->capture_default_str();
    ovh->add_option("--users", users, "Users K")->capture_default_str();
    ovh->add_option("--rf-chains", rf, "RF chains N_RF")->capture_default_str();
    ovh->add_option("--antennas", antennas, "Antennas N")->capture_default_str();

    auto* show = app.add_subcommand("show-config", "Print the resolved experiment config as JSON");
    add_common(show, show_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sweep) {
            const ExperimentConfig cfg = resolve(sweep_opts);
            const SweepResult r = run_nmse_sweep(cfg);
            auto summary = open_csv(cfg, "nmse_sweep.csv");
            write_sweep_csv(summary, cfg, r);
            auto trials = open_csv(cfg, "nmse_trials.csv");
            write_trials_csv(trials, cfg, r);
            write_sweep_csv(std::cout, cfg, r);
        } else if (*gain) {
            const ExperimentConfig cfg = resolve(gain_opts);
            const GainMap g = run_gain_map(cfg);
            auto f = open_csv(cfg, "gain_map.csv");
            write_gain_csv(f, cfg, g);
            for (int m : g.layers) {
                const GainRow& p = g.peak(m);
                std::cout << "layer " << m << ": peak " << p.gain << " at (" << p.x << ", " << p.y << ") m\n";
            }
        } else if (*fl) {
            const ExperimentConfig cfg = resolve(fl_opts);
            const FlResult r = run_fl_experiment(cfg);
            auto f = open_csv(cfg, "fl_train.csv");
            write_fl_csv(f, cfg, r);
            auto o = open_csv(cfg, "overhead.csv");
            write_overhead_csv(o, cfg, r.overhead);
            write_params(fs::path(cfg.output) / "fl_params.bin", Mlp::for_config(cfg.system, cfg.fl.hidden), r.theta);
            std::cout << "parameters " << r.parameters << ", samples/user " << r.samples_per_user << '\n'
                      << "eval NMSE " << r.initial_eval_nmse << " -> " << r.final_eval_nmse << " (labels "
                      << r.label_nmse << ")\n";
            write_overhead_csv(std::cout, cfg, r.overhead);
        } else if (*ovh) {
            const ExperimentConfig cfg = resolve(ovh_opts);
            OverheadInputs in;
            in.samples.assign(users, samples);
            in.rf_chains = rf;
            in.antennas = antennas;
            in.parameters = parameters;
            in.rounds = rounds;
            std::vector<OverheadLine> lines;
            for (bool xi : {false, true}) {
                OverheadLine l{"reference", in, 0, 0};
                l.inputs.labels = xi;
                l.cl = overhead_cl(l.inputs);
                l.fl = overhead_fl(l.inputs);
                lines.push_back(l);
            }
            auto f = open_csv(cfg, "overhead.csv");
            write_overhead_csv(f, cfg, lines);
            write_overhead_csv(std::cout, cfg, lines);
        } else if (*show) {
            std::cout << to_json(resolve(show_opts)).dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

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

#include "nfsplit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>

#ifndef NFSPLIT_VERSION
#define NFSPLIT_VERSION "0.0.0"
#endif

namespace nfsplit {

namespace {

using io::json;

const std::pair<Estimator, const char*> kEstimatorNames[] = {{Estimator::nba_omp, "nba-omp"},
                                                             {Estimator::nf_omp, "nf-omp"},
                                                             {Estimator::ff_omp, "ff-omp"},
                                                             {Estimator::ls, "ls"},
                                                             {Estimator::lmmse, "lmmse"}};

[[noreturn]] void bad(const std::string& key, const std::string& what)
{
    throw std::invalid_argument("config: " + key + ": " + what);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
{
    if (!j.is_object()) bad(where.empty() ? "<root>" : where, "expected an object");
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) bad(where.empty() ? key : where + "." + key, "unknown key");
}

template <typename T>
void read(const json& j, const char* key, T& field, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(field);
    } catch (const json::exception&) {
        bad(where.empty() ? std::string(key) : where + "." + key, "wrong type");
    }
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

std::string to_string(Estimator e)
{
    for (const auto& [k, name] : kEstimatorNames)
        if (k == e) return name;
    return "?";
}

Estimator estimator_from_string(const std::string& s)
{
    for (const auto& [k, name] : kEstimatorNames)
        if (s == name) return k;
    throw std::invalid_argument("unknown estimator \"" + s + "\" (expected nba-omp, nf-omp, ff-omp, ls or lmmse)");
}

std::string to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::snr: return "snr_db";
    case SweepAxis::bandwidth: return "bandwidth_ratio";
    case SweepAxis::none: break;
    }
    return "none";
}

// ---- configuration --------------------------------------------------------

ExperimentConfig ExperimentConfig::desk()
{
    ExperimentConfig c;
    c.profile = "desk";
    c.system = SystemConfig::desk();
    c.grid = GridSpec::for_config(c.system);
    c.fl.hidden = {128, 128};
    c.fl.train.batch_size = 256;
    // same r / F as the paper-scale window
    const double scale = c.system.fraunhofer() / SystemConfig::paper().fraunhofer();
    GainMapSpec& g = c.gain_map;
    g.user_range_m *= scale;
    g.x_min_m *= scale, g.x_max_m *= scale;
    g.y_min_m *= scale, g.y_max_m *= scale;
    return c;
}

ExperimentConfig ExperimentConfig::paper()
{
    ExperimentConfig c;
    c.profile = "paper";
    c.fl.data.scenarios = 100;
    c.fl.data.augment = 10;
    c.fl.train.batch_size = 256;
    return c;
}

ExperimentConfig ExperimentConfig::profile_named(const std::string& name)
{
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    throw std::invalid_argument("unknown profile \"" + name + "\" (expected desk or paper)");
}

SystemConfig ExperimentConfig::system_at(double v) const
{
    SystemConfig s = system;
    if (axis == SweepAxis::bandwidth) s.bandwidth_hz = v * s.carrier_hz;
    return s;
}

double ExperimentConfig::snr_at(double v) const
{
    return axis == SweepAxis::snr ? v : snr_db;
}

void ExperimentConfig::validate() const
{
    if (trials < 1) bad("trials", "must be >= 1");
    if (estimators.empty()) bad("estimators", "must not be empty");
    if (axis != SweepAxis::none && axis_values.empty()) bad("axis_values", "must not be empty");
    if (axis == SweepAxis::bandwidth)
        for (double v : axis_values)
            if (!(v >= 0 && v < 2)) bad("axis_values", "bandwidth ratios must lie in [0, 2)");
    for (double v : axis_values)
        if (!std::isfinite(v)) bad("axis_values", "must be finite");
    if (!std::isfinite(snr_db)) bad("snr_db", "must be finite");
    if (covariance_draws < 1) bad("covariance_draws", "must be >= 1");
    if (workers < 0) bad("workers", "must be >= 0");
    if (ff_angles < 0 || ff_angles == 1) bad("ff_angles", "must be 0 or >= 2");
    if (grid.q_angle < 2) bad("grid.q_angle", "must be >= 2");
    if (grid.q_range < 1) bad("grid.q_range", "must be >= 1");
    try {
        const std::vector<double> points = axis == SweepAxis::none ? std::vector<double>{0.0} : axis_values;
        for (double v : points) {
            const SystemConfig s = system_at(v);
            s.validate();
            if (!(grid.r_min_m > 0 && grid.r_min_m < s.fraunhofer())) bad("grid.r_min_m", "must lie in (0, F)");
        }
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        if (msg.rfind("config:", 0) == 0) throw;
        bad("system", msg);
    }
    const GainMapSpec& g = gain_map;
    if (g.nx < 1 || g.ny < 1) bad("gain_map.nx/ny", "must be >= 1");
    if (!(g.x_max_m > g.x_min_m) || !(g.y_max_m > g.y_min_m)) bad("gain_map", "empty window");
    if (!(g.x_min_m > 0)) bad("gain_map.x_min_m", "must be positive (cells in front of the array)");
    if (!(g.user_range_m > 0)) bad("gain_map.user_range_m", "must be positive");
    if (!(std::abs(g.user_angle_deg) < 90)) bad("gain_map.user_angle_deg", "must lie in (-90, 90)");
    for (int m : g.layers)
        if (m < 0 || m >= system.subcarriers) bad("gain_map.layers", "subcarrier index out of range");
    if (!(g.far_field_factor > 0)) bad("gain_map.far_field_factor", "must be positive");
    for (int h : fl.hidden)
        if (h < 1) bad("fl.hidden", "widths must be >= 1");
    if (fl.data.scenarios < 1) bad("fl.data.scenarios", "must be >= 1");
    if (fl.data.augment < 1) bad("fl.data.augment", "must be >= 1");
    if (fl.data.snrs_db.empty()) bad("fl.data.snrs_db", "must not be empty");
    if (fl.train.rounds < 0) bad("fl.train.rounds", "must be >= 0");
    if (!(fl.train.lr >= 0)) bad("fl.train.lr", "must be >= 0");
    if (fl.train.batch_size < 0) bad("fl.train.batch_size", "must be >= 0");
    if (!(fl.train.dropout >= 0 && fl.train.dropout < 1)) bad("fl.train.dropout", "must lie in [0, 1)");
    if (fl.eval_samples < 1) bad("fl.eval_samples", "must be >= 1");
    if (fl.eval_every < 1) bad("fl.eval_every", "must be >= 1");
}

json to_json(const ExperimentConfig& c)
{
    json est = json::array();
    for (Estimator e : c.estimators) est.push_back(to_string(e));
    const GainMapSpec& g = c.gain_map;
    const FlSpec& f = c.fl;
    return {
        {"profile", c.profile},
        {"system", io::to_json(c.system)},
        {"grid", {{"q_angle", c.grid.q_angle}, {"q_range", c.grid.q_range}, {"r_min_m", c.grid.r_min_m}}},
        {"ff_angles", c.ff_angles},
        {"axis", c.axis == SweepAxis::snr ? "snr" : c.axis == SweepAxis::bandwidth ? "bandwidth" : "none"},
        {"axis_values", c.axis_values},
        {"snr_db", c.snr_db},
        {"trials", c.trials},
        {"estimators", est},
        {"seed", c.seed},
        {"covariance_draws", c.covariance_draws},
        {"workers", c.workers},
        {"output", c.output},
        {"gain_map",
         {{"user_angle_deg", g.user_angle_deg}, {"user_range_m", g.user_range_m}, {"layers", g.layers},
          {"x_min_m", g.x_min_m}, {"x_max_m", g.x_max_m}, {"y_min_m", g.y_min_m}, {"y_max_m", g.y_max_m},
          {"nx", g.nx}, {"ny", g.ny}, {"far_field_factor", g.far_field_factor}}},
        {"fl",
         {{"hidden", f.hidden},
          {"data", {{"scenarios", f.data.scenarios}, {"augment", f.data.augment}, {"snrs_db", f.data.snrs_db}}},
          {"train",
           {{"rounds", f.train.rounds},
            {"lr", f.train.lr},
            {"batch_size", f.train.batch_size},
            {"dropout", f.train.dropout}}},
          {"eval_samples", f.eval_samples},
          {"eval_snr_db", f.eval_snr_db},
          {"eval_every", f.eval_every},
          {"ref_parameters", f.ref_parameters},
          {"ref_rounds", f.ref_rounds},
          {"ref_samples", f.ref_samples}}},
    };
}

ExperimentConfig experiment_from_json(const json& j, const ExperimentConfig& base)
{
    reject_unknown(j,
                   {"profile", "system", "grid", "ff_angles", "axis", "axis_values", "snr_db", "trials", "estimators",
                    "seed", "covariance_draws", "workers", "output", "gain_map", "fl"},
                   "");
    ExperimentConfig c = base;
    read(j, "profile", c.profile, "");
    if (j.contains("system")) {
        try {
            c.system = io::system_from_json(j["system"], c.system);
        } catch (const std::invalid_argument& e) {
            bad("system", e.what());
        }
    }
    if (j.contains("grid")) {
        const json& g = j["grid"];
        reject_unknown(g, {"q_angle", "q_range", "r_min_m"}, "grid");
        read(g, "q_angle", c.grid.q_angle, "grid");
        read(g, "q_range", c.grid.q_range, "grid");
        read(g, "r_min_m", c.grid.r_min_m, "grid");
    }
    read(j, "ff_angles", c.ff_angles, "");
    if (j.contains("axis")) {
        const std::string a = j["axis"].is_string() ? j["axis"].get<std::string>() : "";
        if (a == "snr") c.axis = SweepAxis::snr;
        else if (a == "bandwidth") c.axis = SweepAxis::bandwidth;
        else if (a == "none") c.axis = SweepAxis::none;
        else bad("axis", "expected \"snr\", \"bandwidth\" or \"none\"");
    }
    read(j, "axis_values", c.axis_values, "");
    read(j, "snr_db", c.snr_db, "");
    read(j, "trials", c.trials, "");
    if (j.contains("estimators")) {
        if (!j["estimators"].is_array()) bad("estimators", "expected a list");
        c.estimators.clear();
        for (const json& e : j["estimators"]) {
            if (!e.is_string()) bad("estimators", "expected names");
            try {
                c.estimators.push_back(estimator_from_string(e.get<std::string>()));
            } catch (const std::invalid_argument& ex) {
                bad("estimators", ex.what());
            }
        }
    }
    read(j, "seed", c.seed, "");
    read(j, "covariance_draws", c.covariance_draws, "");
    read(j, "workers", c.workers, "");
    read(j, "output", c.output, "");
    if (j.contains("gain_map")) {
        const json& g = j["gain_map"];
        GainMapSpec& s = c.gain_map;
        reject_unknown(g,
                       {"user_angle_deg", "user_range_m", "layers", "x_min_m", "x_max_m", "y_min_m", "y_max_m", "nx",
                        "ny", "far_field_factor"},
                       "gain_map");
        read(g, "user_angle_deg", s.user_angle_deg, "gain_map");
        read(g, "user_range_m", s.user_range_m, "gain_map");
        read(g, "layers", s.layers, "gain_map");
        read(g, "x_min_m", s.x_min_m, "gain_map");
        read(g, "x_max_m", s.x_max_m, "gain_map");
        read(g, "y_min_m", s.y_min_m, "gain_map");
        read(g, "y_max_m", s.y_max_m, "gain_map");
        read(g, "nx", s.nx, "gain_map");
        read(g, "ny", s.ny, "gain_map");
        read(g, "far_field_factor", s.far_field_factor, "gain_map");
    }
    if (j.contains("fl")) {
        const json& f = j["fl"];
        FlSpec& s = c.fl;
        reject_unknown(f,
                       {"hidden", "data", "train", "eval_samples", "eval_snr_db", "eval_every", "ref_parameters",
                        "ref_rounds", "ref_samples"},
                       "fl");
        read(f, "hidden", s.hidden, "fl");
        if (f.contains("data")) {
            reject_unknown(f["data"], {"scenarios", "augment", "snrs_db"}, "fl.data");
            read(f["data"], "scenarios", s.data.scenarios, "fl.data");
            read(f["data"], "augment", s.data.augment, "fl.data");
            read(f["data"], "snrs_db", s.data.snrs_db, "fl.data");
        }
        if (f.contains("train")) {
            reject_unknown(f["train"], {"rounds", "lr", "batch_size", "dropout"}, "fl.train");
            read(f["train"], "rounds", s.train.rounds, "fl.train");
            read(f["train"], "lr", s.train.lr, "fl.train");
            read(f["train"], "batch_size", s.train.batch_size, "fl.train");
            read(f["train"], "dropout", s.train.dropout, "fl.train");
        }
        read(f, "eval_samples", s.eval_samples, "fl");
        read(f, "eval_snr_db", s.eval_snr_db, "fl");
        read(f, "eval_every", s.eval_every, "fl");
        read(f, "ref_parameters", s.ref_parameters, "fl");
        read(f, "ref_rounds", s.ref_rounds, "fl");
        read(f, "ref_samples", s.ref_samples, "fl");
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, const ExperimentConfig& base)
{
    const json j = io::read_json(path);
    try {
        return experiment_from_json(j, base);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::string config_hash(const ExperimentConfig& c)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string csv_banner(const ExperimentConfig& c, const std::string& tool)
{
    return "# nfsplit " NFSPLIT_VERSION " " + tool + " config=" + config_hash(c) + " seed=" + std::to_string(c.seed);
}

// ---- NMSE sweeps ----------------------------------------------------------

double SweepRow::mean_db() const
{
    return 10.0 * std::log10(mean);
}

const SweepRow& SweepResult::row(double v, Estimator e) const
{
    for (const SweepRow& r : rows)
        if (r.axis_value == v && r.estimator == e) return r;
    throw std::out_of_range("SweepResult::row: no such sweep point / estimator");
}

namespace {

struct PointContext {
    SystemConfig system;
    double noise_var = 0;
    std::optional<Dictionary> nba, nf, ff;
};

bool uses(const ExperimentConfig& c, Estimator e)
{
    return std::find(c.estimators.begin(), c.estimators.end(), e) != c.estimators.end();
}

PointContext make_context(const ExperimentConfig& cfg, double axis_value)
{
    PointContext ctx;
    ctx.system = cfg.system_at(axis_value);
    ctx.noise_var = std::pow(10.0, -cfg.snr_at(axis_value) / 10.0);
    if (uses(cfg, Estimator::nba_omp) || uses(cfg, Estimator::nf_omp)) {
        const PhysicalGrid grid = build_physical_grid(ctx.system, cfg.grid);
        if (uses(cfg, Estimator::nba_omp)) ctx.nba = build_nba(grid, ctx.system);
        if (uses(cfg, Estimator::nf_omp)) ctx.nf = build_si_nearfield(grid, ctx.system);
    }
    if (uses(cfg, Estimator::ff_omp))
        ctx.ff = build_si_farfield(ctx.system, cfg.ff_angles > 0 ? cfg.ff_angles : cfg.grid.q_angle * cfg.grid.q_range);
    return ctx;
}

std::vector<double> trial_impl(const ExperimentConfig& cfg, const PointContext& ctx, int point, int trial)
{
    const SystemConfig& sys = ctx.system;
    const auto t = static_cast<std::uint64_t>(trial);
    const auto p = static_cast<std::uint64_t>(point);
    const Scenario scenario = sample_scenario(sys, sys.paths, derive_seed(cfg.seed, {stream::scenario, t}));
    const auto [h, scale] = normalize_for_snr(synthesize_channel(scenario, sys));

    std::optional<PilotFrame> frame, frame_full;
    auto omp_frame = [&]() -> const PilotFrame& {
        if (!frame) {
            const Eigen::MatrixXcd F =
                make_pilot_matrix(sys.pilots, sys.n_antennas, derive_seed(cfg.seed, {stream::pilots, t}));
            frame = sound(h, F, ctx.noise_var, derive_seed(cfg.seed, {stream::noise, p, t}));
        }
        return *frame;
    };
    auto full_frame = [&]() -> const PilotFrame& {
        if (!frame_full) {
            const Eigen::MatrixXcd U =
                make_unitary_pilot_matrix(sys.n_antennas, derive_seed(cfg.seed, {stream::pilots, t, 1}));
            frame_full = sound(h, U, ctx.noise_var, derive_seed(cfg.seed, {stream::ls_noise, p, t}));
        }
        return *frame_full;
    };

    OmpOptions opt;
    opt.paths = sys.paths;
    std::vector<double> out;
    out.reserve(cfg.estimators.size());
    for (Estimator e : cfg.estimators) {
        switch (e) {
        case Estimator::nba_omp:
        case Estimator::nf_omp:
        case Estimator::ff_omp: {
            const Dictionary& d = e == Estimator::nba_omp ? *ctx.nba : e == Estimator::nf_omp ? *ctx.nf : *ctx.ff;
            const PilotFrame& f = omp_frame();
            out.push_back(nmse(h, OmpSolver(d, f.f_matrix).run(f, opt).h_hat));
            break;
        }
        case Estimator::ls: out.push_back(nmse(h, ls_estimate(full_frame()))); break;
        case Estimator::lmmse: {
            std::vector<std::vector<Eigen::MatrixXcd>> R;
            R.reserve(scenario.users.size());
            for (std::size_t k = 0; k < scenario.users.size(); ++k)
                R.push_back(conditional_covariance(scenario.users[k], sys, cfg.covariance_draws,
                                                   derive_seed(cfg.seed, {stream::covariance, t, k}), scale));
            out.push_back(nmse(h, lmmse_estimate(full_frame(), R)));
            break;
        }
        }
    }
    return out;
}

std::vector<double> sweep_points(const ExperimentConfig& cfg)
{
    return cfg.axis == SweepAxis::none ? std::vector<double>{cfg.snr_db} : cfg.axis_values;
}

} // namespace

std::vector<double> run_trial(const ExperimentConfig& cfg, int point, int trial)
{
    cfg.validate();
    const std::vector<double> pts = sweep_points(cfg);
    if (point < 0 || point >= static_cast<int>(pts.size())) throw std::out_of_range("run_trial: point index");
    return trial_impl(cfg, make_context(cfg, pts[static_cast<std::size_t>(point)]), point, trial);
}

SweepResult run_nmse_sweep(const ExperimentConfig& cfg)
{
    cfg.validate();
    const std::vector<double> pts = sweep_points(cfg);
    const int P = static_cast<int>(pts.size());
    const int T = cfg.trials;
    const std::size_t E = cfg.estimators.size();

    std::vector<PointContext> ctx;
    ctx.reserve(pts.size());
    for (double v : pts) ctx.push_back(make_context(cfg, v));

    std::vector<std::vector<double>> results(static_cast<std::size_t>(P) * static_cast<std::size_t>(T));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t job = next++; job < results.size(); job = next++) {
            const int point = static_cast<int>(job / static_cast<std::size_t>(T));
            const int trial = static_cast<int>(job % static_cast<std::size_t>(T));
            try {
                results[job] = trial_impl(cfg, ctx[static_cast<std::size_t>(point)], point, trial);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = results.size();
            }
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_workers =
        std::min<std::size_t>(cfg.workers > 0 ? static_cast<std::size_t>(cfg.workers) : hw, results.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 1; i < n_workers; ++i) pool.emplace_back(worker);
        worker();
    }
    if (failure) std::rethrow_exception(failure);

    SweepResult r;
    r.records.reserve(results.size() * E);
    for (int point = 0; point < P; ++point)
        for (int trial = 0; trial < T; ++trial) {
            const auto& v = results[static_cast<std::size_t>(point) * static_cast<std::size_t>(T)
                                    + static_cast<std::size_t>(trial)];
            for (std::size_t e = 0; e < E; ++e)
                r.records.push_back({point, pts[static_cast<std::size_t>(point)], trial, cfg.estimators[e], v[e]});
        }
    for (int point = 0; point < P; ++point)
        for (std::size_t e = 0; e < E; ++e) {
            double sum = 0, sq = 0;
            for (int trial = 0; trial < T; ++trial) {
                const double x = results[static_cast<std::size_t>(point) * static_cast<std::size_t>(T)
                                         + static_cast<std::size_t>(trial)][e];
                sum += x;
                sq += x * x;
            }
            SweepRow row;
            row.axis_value = pts[static_cast<std::size_t>(point)];
            row.estimator = cfg.estimators[e];
            row.trials = T;
            row.mean = sum / T;
            row.stdev = T > 1 ? std::sqrt(std::max(0.0, (sq - T * row.mean * row.mean) / (T - 1))) : 0.0;
            r.rows.push_back(row);
        }
    return r;
}

void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& r)
{
    out << csv_banner(cfg, "nmse-sweep") << '\n';
    out << "axis,axis_value,estimator,mean_nmse,mean_nmse_db,std_nmse,trials\n";
    for (const SweepRow& row : r.rows)
        out << to_string(cfg.axis) << ',' << num(row.axis_value) << ',' << to_string(row.estimator) << ','
            << num(row.mean) << ',' << num(row.mean_db()) << ',' << num(row.stdev) << ',' << row.trials << '\n';
}

void write_trials_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& r)
{
    out << csv_banner(cfg, "nmse-sweep-trials") << '\n';
    out << "point,axis_value,trial,estimator,nmse\n";
    for (const TrialRecord& t : r.records)
        out << t.point << ',' << num(t.axis_value) << ',' << t.trial << ',' << to_string(t.estimator) << ','
            << num(t.nmse) << '\n';
}

// ---- gain maps ------------------------------------------------------------

Point polar_from_cartesian(double x, double y)
{
    const double r = std::hypot(x, y);
    return {y / r, r};
}

std::pair<double, double> cartesian_from_polar(const Point& p)
{
    return {p.range_m * std::sqrt(std::max(0.0, 1.0 - p.sin_doa * p.sin_doa)), p.range_m * p.sin_doa};
}

const GainRow& GainMap::peak(int layer) const
{
    for (const GainRow& r : rows)
        if (r.kind == "peak" && r.layer == layer) return r;
    throw std::out_of_range("GainMap::peak: no such layer");
}

GainMap run_gain_map(const ExperimentConfig& cfg)
{
    cfg.validate();
    const SystemConfig& sys = cfg.system;
    const GainMapSpec& s = cfg.gain_map;
    const Geometry geom = sys.geometry();
    const Subcarriers sc = sys.subcarrier_grid();

    GainMap g;
    g.layers = s.layers;
    if (g.layers.empty()) {
        g.layers = {0};
        if (sc.m_count > 2) g.layers.push_back(sc.m_count / 2);
        if (sc.m_count > 1) g.layers.push_back(sc.m_count - 1);
    }
    g.far_field = s.user_range_m > s.far_field_factor * sys.fraunhofer();
    const SteeringMode mode = g.far_field ? SteeringMode::far_field : SteeringMode::fresnel;
    const Point user{std::sin(s.user_angle_deg * std::numbers::pi / 180.0), s.user_range_m};

    const auto [ux, uy] = cartesian_from_polar(user);
    g.rows.push_back({"user", -1, ux, uy, 1.0});

    const int cells = s.nx * s.ny;
    auto cx = [&](int i) { return s.nx == 1 ? s.x_min_m : s.x_min_m + (s.x_max_m - s.x_min_m) * i / (s.nx - 1); };
    auto cy = [&](int i) { return s.ny == 1 ? s.y_min_m : s.y_min_m + (s.y_max_m - s.y_min_m) * i / (s.ny - 1); };
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(cells));
    for (int iy = 0; iy < s.ny; ++iy)
        for (int ix = 0; ix < s.nx; ++ix) pts.push_back(polar_from_cartesian(cx(ix), cy(iy)));

    Eigen::VectorXd composite = Eigen::VectorXd::Zero(cells);
    auto emit_peak = [&](int layer, const Eigen::VectorXd& gain) {
        Eigen::Index arg = 0;
        const double peak = gain.maxCoeff(&arg);
        g.rows.push_back({"peak", layer, cx(int(arg % s.nx)), cy(int(arg / s.nx)), peak});
    };
    for (int m : g.layers) {
        Eigen::VectorXd gain(cells);
        for (int c = 0; c < cells; ++c) {
            Point p = pts[static_cast<std::size_t>(c)];
            if (g.far_field) p.range_m = std::numeric_limits<double>::infinity();
            gain[c] = array_gain(user, p, m, sc, geom, mode);
        }
        composite += gain;
        for (int c = 0; c < cells; ++c)
            g.rows.push_back({"cell", m, cx(c % s.nx), cy(c / s.nx), gain[c]});
        emit_peak(m, gain);

        // predicted focus; plane-wave focus is drawn at the window's centre radius
        const double eta = sc.eta(m);
        double fx, fy;
        if (g.far_field) {
            const double r = std::hypot((s.x_min_m + s.x_max_m) / 2, (s.y_min_m + s.y_max_m) / 2);
            std::tie(fx, fy) = cartesian_from_polar(Point{eta * user.sin_doa, r});
        } else {
            std::tie(fx, fy) = cartesian_from_polar(spatial_from_physical(user, eta));
        }
        g.rows.push_back({"focus", m, fx, fy, std::numeric_limits<double>::quiet_NaN()});
    }
    for (int c = 0; c < cells; ++c) g.rows.push_back({"cell", -1, cx(c % s.nx), cy(c / s.nx), composite[c]});
    emit_peak(-1, composite);
    return g;
}

void write_gain_csv(std::ostream& out, const ExperimentConfig& cfg, const GainMap& g)
{
    out << csv_banner(cfg, "gain-map") << '\n';
    out << "kind,layer,x_m,y_m,gain\n";
    for (const GainRow& r : g.rows) {
        out << r.kind << ',' << r.layer << ',' << num(r.x) << ',' << num(r.y) << ',';
        if (!std::isnan(r.gain)) out << num(r.gain);
        out << '\n';
    }
}

// ---- federated learning ---------------------------------------------------

std::vector<OverheadLine> overhead_report(const OverheadInputs& model, const OverheadInputs& reference)
{
    std::vector<OverheadLine> out;
    for (const auto& [scope, in] : {std::pair{"model", model}, std::pair{"reference", reference}})
        for (bool xi : {false, true}) {
            OverheadLine l;
            l.scope = scope;
            l.inputs = in;
            l.inputs.labels = xi;
            l.cl = overhead_cl(l.inputs);
            l.fl = overhead_fl(l.inputs);
            out.push_back(l);
        }
    return out;
}

OverheadInputs reference_overhead(const FlSpec& fl, int users, int rf_chains, int antennas)
{
    OverheadInputs in;
    in.samples.assign(static_cast<std::size_t>(users), fl.ref_samples);
    in.rf_chains = static_cast<std::uint64_t>(rf_chains);
    in.antennas = static_cast<std::uint64_t>(antennas);
    in.parameters = fl.ref_parameters;
    in.rounds = fl.ref_rounds;
    return in;
}

FlResult run_fl_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const SystemConfig& sys = cfg.system;
    const Dictionary nba = build_nba(build_physical_grid(sys, cfg.grid), sys);
    const OmpSolver solver(nba, make_pilot_matrix(sys.pilots, sys.n_antennas, derive_seed(cfg.seed, {stream::pilots})));

    DatasetOptions data = cfg.fl.data;
    data.paths = sys.paths;
    data.keep_truth = false;
    const std::vector<LocalDataset> local = build_datasets(sys, data, solver, derive_seed(cfg.seed, {stream::dataset}));

    // held-out samples from fresh realisations in every user's sector,
    // standardised with the mean of the users' statistics
    std::vector<Standardizer> stats;
    for (const LocalDataset& d : local) stats.push_back(d.stats);
    const Standardizer global = Standardizer::average(stats);
    DatasetOptions ev;
    ev.paths = sys.paths;
    ev.snrs_db = {cfg.fl.eval_snr_db};
    ev.augment = 1;
    ev.keep_truth = true;
    const int per_user = sys.users * sys.subcarriers;
    ev.scenarios = (cfg.fl.eval_samples + per_user - 1) / per_user;
    Eigen::MatrixXd Xe, Le, Te;
    {
        std::vector<LocalDataset> parts;
        Eigen::Index total = 0;
        for (int k = 0; k < sys.users; ++k) {
            parts.push_back(build_dataset(sys, ev, solver, k, derive_seed(cfg.seed, {stream::evaluation})));
            LocalDataset& d = parts.back();
            for (int c = 0; c < 3; ++c) {
                auto block = d.inputs.middleRows(Eigen::Index(c) * d.pilots, d.pilots);
                block = block.array() * d.stats.stdev[c] + d.stats.mean[c];
            }
            global.apply(d.inputs, d.pilots);
            total += d.count();
        }
        const Eigen::Index n = cfg.fl.eval_samples;
        Xe.resize(parts.front().inputs.rows(), n);
        Le.resize(parts.front().labels.rows(), n);
        Te.resize(parts.front().labels.rows(), n);
        const Eigen::Index each = parts.front().count();
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index src = i * total / n;
            const LocalDataset& d = parts[static_cast<std::size_t>(src / each)];
            Xe.col(i) = d.inputs.col(src % each);
            Le.col(i) = d.labels.col(src % each);
            Te.col(i) = d.truth.col(src % each);
        }
    }

    const Mlp net = Mlp::for_config(sys, cfg.fl.hidden);
    const Eigen::VectorXd theta0 = net.init(derive_seed(cfg.seed, {stream::weights}));
    auto evaluate = [&](const Eigen::VectorXd& theta) { return regression_nmse(net.forward(theta, Xe), Te); };

    FlResult res;
    res.parameters = net.parameter_count();
    res.samples_per_user = local.front().count();
    res.label_nmse = regression_nmse(Le, Te);
    res.initial_eval_nmse = evaluate(theta0);
    res.final_eval_nmse = res.initial_eval_nmse;

    TrainOptions topt = cfg.fl.train;
    topt.seed = derive_seed(cfg.seed, {stream::batches});
    const int T = topt.rounds;
    const TrainResult tr = train(net, theta0, local, topt, [&](int t, const Eigen::VectorXd& theta, double loss) {
        FlRound r{t + 1, loss, std::nullopt};
        if ((t + 1) % cfg.fl.eval_every == 0 || t + 1 == T) r.eval_nmse = evaluate(theta);
        res.rounds.push_back(r);
    });
    res.theta = tr.theta;
    if (!res.rounds.empty()) res.final_eval_nmse = *res.rounds.back().eval_nmse;

    OverheadInputs model;
    model.samples.assign(local.size(), static_cast<std::uint64_t>(res.samples_per_user));
    model.rf_chains = static_cast<std::uint64_t>(sys.rf_chains);
    model.antennas = static_cast<std::uint64_t>(sys.n_antennas);
    model.parameters = static_cast<std::uint64_t>(res.parameters);
    model.rounds = static_cast<std::uint64_t>(T);
    res.overhead = overhead_report(model, reference_overhead(cfg.fl, 8, 8, 256));
    return res;
}

void write_fl_csv(std::ostream& out, const ExperimentConfig& cfg, const FlResult& r)
{
    out << csv_banner(cfg, "fl-train") << '\n';
    out << "# parameters=" << r.parameters << " samples_per_user=" << r.samples_per_user
        << " label_nmse=" << num(r.label_nmse) << '\n';
    out << "round,train_loss,eval_nmse\n";
    out << 0 << ",," << num(r.initial_eval_nmse) << '\n';
    for (const FlRound& f : r.rounds) {
        out << f.round << ',' << num(f.train_loss) << ',';
        if (f.eval_nmse) out << num(*f.eval_nmse);
        out << '\n';
    }
}

void write_overhead_csv(std::ostream& out, const ExperimentConfig& cfg, const std::vector<OverheadLine>& lines)
{
    out << csv_banner(cfg, "overhead") << '\n';
    out << "scope,xi,users,samples_per_user,rf_chains,antennas,parameters,rounds,t_cl,t_fl,ratio\n";
    for (const OverheadLine& l : lines)
        out << l.scope << ',' << (l.inputs.labels ? 1 : 0) << ',' << l.inputs.users() << ','
            << (l.inputs.samples.empty() ? 0 : l.inputs.samples.front()) << ',' << l.inputs.rf_chains << ','
            << l.inputs.antennas << ',' << l.inputs.parameters << ',' << l.inputs.rounds << ',' << l.cl << ','
            << l.fl << ',' << num(l.ratio()) << '\n';
}

} // namespace nfsplit

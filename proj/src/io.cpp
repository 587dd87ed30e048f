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

#include "nfsplit/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

namespace nfsplit::io {

namespace {

json length(double r)
{
    return std::isfinite(r) ? json(r) : json(nullptr);
}

double length_from(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json matrix_rows(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
{
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw std::invalid_argument(where + ": unknown key \"" + key + "\"");
}

} // namespace

json to_json(const SystemConfig& c)
{
    return {{"n_antennas", c.n_antennas},   {"carrier_hz", c.carrier_hz}, {"bandwidth_hz", c.bandwidth_hz},
            {"subcarriers", c.subcarriers}, {"pilots", c.pilots},         {"rf_chains", c.rf_chains},
            {"users", c.users},             {"paths", c.paths},           {"k_abs_per_m", c.k_abs_per_m},
            {"range_min_m", c.range_min_m}, {"range_max_m", c.range_max_m}, {"nlos_jitter_s", c.nlos_jitter_s}};
}

SystemConfig system_from_json(const json& j, const SystemConfig& base)
{
    if (!j.is_object()) throw std::invalid_argument("system: expected an object");
    reject_unknown(j,
                   {"n_antennas", "carrier_hz", "bandwidth_hz", "subcarriers", "pilots", "rf_chains", "users", "paths",
                    "k_abs_per_m", "range_min_m", "range_max_m", "nlos_jitter_s"},
                   "system");
    SystemConfig c = base;
    auto get = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const json::exception&) {
            throw std::invalid_argument(std::string("system.") + key + ": wrong type");
        }
    };
    get("n_antennas", c.n_antennas);
    get("carrier_hz", c.carrier_hz);
    get("bandwidth_hz", c.bandwidth_hz);
    get("subcarriers", c.subcarriers);
    get("pilots", c.pilots);
    get("rf_chains", c.rf_chains);
    get("users", c.users);
    get("paths", c.paths);
    get("k_abs_per_m", c.k_abs_per_m);
    get("range_min_m", c.range_min_m);
    get("range_max_m", c.range_max_m);
    get("nlos_jitter_s", c.nlos_jitter_s);
    return c;
}

json to_json(const Scenario& s)
{
    json users = json::array();
    int L = 0;
    for (const UserPaths& u : s.users) {
        json paths = json::array();
        L = static_cast<int>(u.size());
        for (const PathSpec& p : u) {
            json gains = json::array();
            for (Eigen::Index m = 0; m < p.gains.size(); ++m) gains.push_back({p.gains[m].real(), p.gains[m].imag()});
            paths.push_back({{"sin_doa", p.point.sin_doa},
                             {"range_m", length(p.point.range_m)},
                             {"delay_s", p.delay_s},
                             {"gains", std::move(gains)}});
        }
        users.push_back(std::move(paths));
    }
    return {{"seed", s.seed}, {"users", s.user_count()}, {"paths", L}, {"channels", std::move(users)}};
}

Scenario scenario_from_json(const json& j)
{
    Scenario s;
    try {
        s.seed = j.at("seed").get<std::uint64_t>();
        for (const json& u : j.at("channels")) {
            UserPaths paths;
            for (const json& p : u) {
                PathSpec ps;
                ps.point.sin_doa = p.at("sin_doa").get<double>();
                ps.point.range_m = length_from(p.at("range_m"));
                ps.delay_s = p.at("delay_s").get<double>();
                const json& g = p.at("gains");
                ps.gains.resize(static_cast<Eigen::Index>(g.size()));
                for (std::size_t m = 0; m < g.size(); ++m)
                    ps.gains[static_cast<Eigen::Index>(m)] = {g[m].at(0).get<double>(), g[m].at(1).get<double>()};
                paths.push_back(std::move(ps));
            }
            s.users.push_back(std::move(paths));
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scenario: ") + e.what());
    }
    if (j.contains("users") && j["users"].get<int>() != s.user_count())
        throw std::invalid_argument("scenario: user count does not match the channel list");
    return s;
}

json to_json(const EstimateReport& r)
{
    json users = json::array();
    for (std::size_t k = 0; k < r.supports.size(); ++k) {
        json ranges = json::array();
        for (double v : r.ranges[k]) ranges.push_back(length(v));
        json coeff = json::array();
        const Eigen::MatrixXcd& u = r.coefficients[k];
        for (Eigen::Index l = 0; l < u.rows(); ++l) {
            json row = json::array();
            for (Eigen::Index m = 0; m < u.cols(); ++m) row.push_back({u(l, m).real(), u(l, m).imag()});
            coeff.push_back(std::move(row));
        }
        json entry = {{"support", r.supports[k]},
                      {"sin_doa", r.doas[k]},
                      {"range_m", std::move(ranges)},
                      {"delta_doa", matrix_rows(r.delta_doa[k])},
                      {"delta_range_m", matrix_rows(r.delta_range[k])},
                      {"coefficients", std::move(coeff)},
                      {"condition", r.condition[k]}};
        if (k < r.nmse.size()) entry["nmse"] = r.nmse[k];
        users.push_back(std::move(entry));
    }
    return {{"users", std::move(users)}};
}

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        // the message carries the line and column
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

} // namespace nfsplit::io

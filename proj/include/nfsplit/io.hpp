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

#ifndef NFSPLIT_IO_HPP
#define NFSPLIT_IO_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "nfsplit/channel.hpp"
#include "nfsplit/estimators.hpp"

namespace nfsplit::io {

using nlohmann::json;

// Infinite ranges are written as null and read back as +inf.
json to_json(const SystemConfig& cfg);
// Missing keys keep the values of `base`; unknown keys throw.
SystemConfig system_from_json(const json& j, const SystemConfig& base = SystemConfig::paper());

json to_json(const Scenario& s);
Scenario scenario_from_json(const json& j);

// supports, recovered points, beam-split deltas, coefficients, per-user NMSE.
json to_json(const EstimateReport& r);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

} // namespace nfsplit::io

#endif // NFSPLIT_IO_HPP

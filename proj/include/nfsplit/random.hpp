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

#ifndef NFSPLIT_RANDOM_HPP
#define NFSPLIT_RANDOM_HPP

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace nfsplit {

using Rng = std::mt19937_64;

// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Counter-based seed derivation: the seed of a stream depends only on the
// base seed and the listed counters (sweep index, trial index, stream tag...).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> counters)
{
    std::uint64_t s = mix64(base);
    for (std::uint64_t c : counters) s = mix64(s ^ mix64(c + 0x632BE59BD9B4E019ull));
    return s;
}

namespace stream {
inline constexpr std::uint64_t scenario = 1;
inline constexpr std::uint64_t noise = 2;
inline constexpr std::uint64_t pilots = 3;
inline constexpr std::uint64_t covariance = 4;
inline constexpr std::uint64_t ls_noise = 5;
inline constexpr std::uint64_t weights = 6;
inline constexpr std::uint64_t dataset = 7;
inline constexpr std::uint64_t batches = 8;
inline constexpr std::uint64_t evaluation = 9;
} // namespace stream

// Circularly-symmetric complex Gaussian with E|w|^2 = variance.
inline std::complex<double> complex_gaussian(Rng& rng, double variance)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    const double s = std::sqrt(variance / 2.0);
    const double re = nd(rng);
    const double im = nd(rng);
    return {s * re, s * im};
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace nfsplit

#endif // NFSPLIT_RANDOM_HPP

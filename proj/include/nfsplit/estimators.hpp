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

#ifndef NFSPLIT_ESTIMATORS_HPP
#define NFSPLIT_ESTIMATORS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nfsplit/channel.hpp"
#include "nfsplit/dictionary.hpp"

namespace nfsplit {

struct PilotFrame {
    Eigen::MatrixXcd f_matrix;       // P x N
    double noise_var = 0;
    std::vector<Eigen::MatrixXcd> y;  // per user, P x M

    int pilots() const { return static_cast<int>(f_matrix.rows()); }
    int users() const { return static_cast<int>(y.size()); }
};

// P x N with entries exp(j psi) / sqrt(N), psi i.i.d. uniform.
Eigen::MatrixXcd make_pilot_matrix(int pilots, int antennas, std::uint64_t seed);

// Unitary N x N pilot matrix with constant-modulus entries: the unitary DFT
// with random column phases. Used by the LS / LMMSE baselines (P = N).
Eigen::MatrixXcd make_unitary_pilot_matrix(int antennas, std::uint64_t seed);

// y_k[m] = F h_k[m] + w_k[m], w ~ CN(0, noise_var I).
PilotFrame sound(const ChannelTensor& h, const Eigen::MatrixXcd& F, double noise_var, std::uint64_t seed);

// (F^H F)^-1 F^H y per user and subcarrier. Throws on rank deficiency.
ChannelTensor ls_estimate(const PilotFrame& frame);

// covariances[k][m] is R_k[m]. Computes R F^H (F R F^H + s^2 I)^-1 y.
ChannelTensor lmmse_estimate(const PilotFrame& frame, const std::vector<std::vector<Eigen::MatrixXcd>>& covariances);

// (1/D) sum_d h_d h_d^H
Eigen::MatrixXcd sample_covariance(std::span<const Eigen::VectorXcd> draws);

// Sample covariance of one user's channel over `draws` small-scale fading
// realisations (path phases and NLoS delay jitter redrawn, path geometry
// fixed), multiplied by scale^2. Returned per subcarrier. Evaluated in the
// factored form A_m S_m A_m^H, which equals the sample covariance of the
// drawn channels.
std::vector<Eigen::MatrixXcd> conditional_covariance(const UserPaths& paths, const SystemConfig& cfg, int draws,
                                                     std::uint64_t seed, double scale = 1.0);

enum class EtaSource { dictionary, unity };
enum class ReconstructionBasis { subcarrier_exact, carrier };

struct OmpOptions {
    int paths = 3;
    EtaSource eta_source = EtaSource::dictionary;
    ReconstructionBasis basis = ReconstructionBasis::subcarrier_exact;
    // Select on sum_m |psi^H r| / ||psi||. When false, uses the raw
    // correlation sum_m |c^H F^H r|.
    bool normalized_selector = true;
    double pinv_floor = 1e-10;
};

struct EstimateReport {
    ChannelTensor h_hat;
    std::vector<std::vector<int>> supports;          // [k][l]
    std::vector<std::vector<double>> doas;           // [k][l]
    std::vector<std::vector<double>> ranges;         // [k][l], +inf for far-field atoms
    std::vector<Eigen::MatrixXd> delta_doa;          // [k] L x M
    std::vector<Eigen::MatrixXd> delta_range;        // [k] L x M
    std::vector<Eigen::MatrixXcd> coefficients;      // [k] L x M, u_k[m]
    std::vector<double> condition;                   // [k] worst cond(Psi_m) over m
    std::vector<double> nmse;                        // [k], filled by score()
    std::vector<Eigen::MatrixXd> residual_norms;     // [k] (L+1) x M, ||r_l[m]|| for l = 0..L
};

// Precomputes Psi_m = F C_m for one dictionary and pilot matrix so repeated
// runs only cost the greedy iterations.
class OmpSolver {
public:
    OmpSolver(const Dictionary& dict, const Eigen::MatrixXcd& F);

    EstimateReport run(const PilotFrame& frame, const OmpOptions& options) const;

    // Step-4 scores for one residual set (P x M), before masking.
    Eigen::VectorXd selector_scores(const Eigen::MatrixXcd& residual, bool normalized) const;

    const Dictionary& dictionary() const { return *dict_; }
    const Eigen::MatrixXcd& pilots() const { return f_; }
    const Eigen::MatrixXcd& sensing(int m) const;

private:
    const Dictionary* dict_;
    Eigen::MatrixXcd f_;
    std::vector<Eigen::MatrixXcd> psi_;       // one per subcarrier, or one shared
    std::vector<Eigen::VectorXd> col_norms_;
};

EstimateReport omp_run(const PilotFrame& frame, const Dictionary& dict, int L,
                       EtaSource eta_source = EtaSource::dictionary);

// h_hat_k[m] = Xi_{k,m} u_k[m], with Xi built from the recovered points.
ChannelTensor reconstruct(const EstimateReport& report, const Geometry& geom, const Subcarriers& subcarriers,
                          ReconstructionBasis basis = ReconstructionBasis::subcarrier_exact);
ChannelTensor reconstruct(const EstimateReport& report, const SystemConfig& cfg,
                          ReconstructionBasis basis = ReconstructionBasis::subcarrier_exact);

// Mean over users of sum_m ||h_hat - h||^2 / sum_m ||h||^2.
double nmse(const ChannelTensor& h_true, const ChannelTensor& h_hat);
std::vector<double> nmse_per_user(const ChannelTensor& h_true, const ChannelTensor& h_hat);

// Fills report.nmse against the ground truth.
void score(EstimateReport& report, const ChannelTensor& h_true);

} // namespace nfsplit

#endif // NFSPLIT_ESTIMATORS_HPP

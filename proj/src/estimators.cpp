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

#include "nfsplit/estimators.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nfsplit/linalg.hpp"
#include "nfsplit/random.hpp"

namespace nfsplit {

Eigen::MatrixXcd make_pilot_matrix(int pilots, int antennas, std::uint64_t seed)
{
    if (pilots < 1 || antennas < 1) throw std::invalid_argument("make_pilot_matrix: dimensions must be positive");
    Rng rng(seed);
    const double mod = 1.0 / std::sqrt(double(antennas));
    Eigen::MatrixXcd F(pilots, antennas);
    for (int p = 0; p < pilots; ++p)
        for (int n = 0; n < antennas; ++n) F(p, n) = std::polar(mod, uniform(rng, 0.0, 2.0 * std::numbers::pi));
    return F;
}

Eigen::MatrixXcd make_unitary_pilot_matrix(int antennas, std::uint64_t seed)
{
    if (antennas < 1) throw std::invalid_argument("make_unitary_pilot_matrix: antennas must be positive");
    Rng rng(seed);
    const double mod = 1.0 / std::sqrt(double(antennas));
    Eigen::VectorXcd phase(antennas);
    for (int n = 0; n < antennas; ++n) phase[n] = std::polar(1.0, uniform(rng, 0.0, 2.0 * std::numbers::pi));
    Eigen::MatrixXcd F(antennas, antennas);
    for (int p = 0; p < antennas; ++p)
        for (int n = 0; n < antennas; ++n) {
            const double arg = -2.0 * std::numbers::pi * double((static_cast<long long>(p) * n) % antennas)
                               / double(antennas);
            F(p, n) = std::polar(mod, arg) * phase[n];
        }
    return F;
}

PilotFrame sound(const ChannelTensor& h, const Eigen::MatrixXcd& F, double noise_var, std::uint64_t seed)
{
    if (noise_var < 0) throw std::invalid_argument("sound: noise variance must be >= 0");
    if (h.users() > 0 && F.cols() != h.antennas())
        throw std::invalid_argument("sound: pilot matrix has " + std::to_string(F.cols()) + " columns, channel has "
                                    + std::to_string(h.antennas()) + " antennas");
    PilotFrame frame;
    frame.f_matrix = F;
    frame.noise_var = noise_var;
    frame.y.reserve(h.h.size());
    Rng rng(seed);
    for (const auto& hk : h.h) {
        Eigen::MatrixXcd y = F * hk;
        for (Eigen::Index m = 0; m < y.cols(); ++m)
            for (Eigen::Index p = 0; p < y.rows(); ++p) y(p, m) += complex_gaussian(rng, noise_var);
        frame.y.push_back(std::move(y));
    }
    return frame;
}

ChannelTensor ls_estimate(const PilotFrame& frame)
{
    const Eigen::MatrixXcd& F = frame.f_matrix;
    if (F.rows() < F.cols())
        throw std::invalid_argument("ls_estimate: needs P >= N pilots (got P=" + std::to_string(F.rows())
                                    + ", N=" + std::to_string(F.cols()) + ")");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(F);
    if (qr.rank() < F.cols()) throw std::runtime_error("ls_estimate: pilot matrix is rank deficient");
    ChannelTensor out;
    out.h.reserve(frame.y.size());
    for (const auto& y : frame.y) out.h.push_back(qr.solve(y));
    return out;
}

ChannelTensor lmmse_estimate(const PilotFrame& frame, const std::vector<std::vector<Eigen::MatrixXcd>>& covariances)
{
    const Eigen::MatrixXcd& F = frame.f_matrix;
    if (covariances.size() != frame.y.size())
        throw std::invalid_argument("lmmse_estimate: need one covariance set per user");
    ChannelTensor out;
    out.h.reserve(frame.y.size());
    for (std::size_t k = 0; k < frame.y.size(); ++k) {
        const Eigen::MatrixXcd& y = frame.y[k];
        if (covariances[k].size() != static_cast<std::size_t>(y.cols()))
            throw std::invalid_argument("lmmse_estimate: need one covariance per subcarrier");
        Eigen::MatrixXcd hk(F.cols(), y.cols());
        for (Eigen::Index m = 0; m < y.cols(); ++m) {
            const Eigen::MatrixXcd& R = covariances[k][static_cast<std::size_t>(m)];
            const Eigen::MatrixXcd RFh = R * F.adjoint();
            Eigen::MatrixXcd A = F * RFh;
            A.diagonal().array() += frame.noise_var;
            Eigen::LDLT<Eigen::MatrixXcd> ldlt(A);
            if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
                throw std::runtime_error("lmmse_estimate: F R F^H + s^2 I is singular (user " + std::to_string(k)
                                         + ", subcarrier " + std::to_string(m) + ")");
            hk.col(m) = RFh * ldlt.solve(y.col(m));
        }
        out.h.push_back(std::move(hk));
    }
    return out;
}

Eigen::MatrixXcd sample_covariance(std::span<const Eigen::VectorXcd> draws)
{
    if (draws.empty()) throw std::invalid_argument("sample_covariance: no draws");
    const Eigen::Index n = draws.front().size();
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& h : draws) R.noalias() += h * h.adjoint();
    return R / double(draws.size());
}

std::vector<Eigen::MatrixXcd> conditional_covariance(const UserPaths& paths, const SystemConfig& cfg, int draws,
                                                     std::uint64_t seed, double scale)
{
    if (draws < 1) throw std::invalid_argument("conditional_covariance: draws must be >= 1");
    if (paths.empty()) throw std::invalid_argument("conditional_covariance: no paths");
    const Geometry geom = cfg.geometry();
    const Subcarriers sc = cfg.subcarrier_grid();
    const Eigen::Index L = static_cast<Eigen::Index>(paths.size());
    const double norm = std::sqrt(double(cfg.n_antennas) / double(L));

    std::vector<Eigen::MatrixXcd> S(static_cast<std::size_t>(sc.m_count), Eigen::MatrixXcd::Zero(L, L));
    Rng rng(seed);
    Eigen::VectorXd phase(L);
    Eigen::VectorXd delay(L);
    Eigen::VectorXcd g(L);
    for (int d = 0; d < draws; ++d) {
        for (Eigen::Index l = 0; l < L; ++l) {
            phase[l] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            delay[l] = paths[static_cast<std::size_t>(l)].point.range_m / kSpeedOfLight;
            if (l > 0) delay[l] += uniform(rng, 0.0, cfg.nlos_jitter_s);
        }
        for (int m = 0; m < sc.m_count; ++m) {
            for (Eigen::Index l = 0; l < L; ++l) {
                const double mag = std::abs(paths[static_cast<std::size_t>(l)].gains[m]);
                g[l] = norm * std::polar(mag, phase[l] - 2.0 * std::numbers::pi * delay[l] * sc.freq(m));
            }
            S[static_cast<std::size_t>(m)].noalias() += g * g.adjoint();
        }
    }
    std::vector<Eigen::MatrixXcd> R;
    R.reserve(S.size());
    Eigen::MatrixXcd A(cfg.n_antennas, L);
    for (int m = 0; m < sc.m_count; ++m) {
        for (Eigen::Index l = 0; l < L; ++l)
            A.col(l) = steering_vector(paths[static_cast<std::size_t>(l)].point, sc.freq(m), geom, SteeringMode::exact);
        R.push_back((scale * scale / double(draws)) * (A * S[static_cast<std::size_t>(m)] * A.adjoint()));
    }
    return R;
}

OmpSolver::OmpSolver(const Dictionary& dict, const Eigen::MatrixXcd& F) : dict_(&dict), f_(F)
{
    if (F.cols() != dict.antennas())
        throw std::invalid_argument("OmpSolver: pilot matrix width does not match the dictionary");
    const bool shared = dict.kind() != DictionaryKind::nba;
    const int count = shared ? 1 : dict.subcarrier_count();
    psi_.reserve(static_cast<std::size_t>(count));
    col_norms_.reserve(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m) {
        psi_.push_back(F * dict.materialize(m));
        col_norms_.push_back(psi_.back().colwise().norm().transpose());
    }
}

const Eigen::MatrixXcd& OmpSolver::sensing(int m) const
{
    return psi_.size() == 1 ? psi_.front() : psi_[static_cast<std::size_t>(m)];
}

Eigen::VectorXd OmpSolver::selector_scores(const Eigen::MatrixXcd& residual, bool normalized) const
{
    const int M = dict_->subcarrier_count();
    Eigen::VectorXd score = Eigen::VectorXd::Zero(dict_->size());
    for (int m = 0; m < M; ++m) {
        const std::size_t i = psi_.size() == 1 ? 0 : static_cast<std::size_t>(m);
        Eigen::VectorXd c = (psi_[i].adjoint() * residual.col(m)).cwiseAbs();
        if (normalized) c.array() /= col_norms_[i].array().max(std::numeric_limits<double>::min());
        score += c;
    }
    return score;
}

EstimateReport OmpSolver::run(const PilotFrame& frame, const OmpOptions& options) const
{
    const Dictionary& dict = *dict_;
    const int M = dict.subcarrier_count();
    const int L = options.paths;
    if (L < 1) throw std::invalid_argument("omp_run: L must be >= 1");
    if (L > dict.size()) throw std::invalid_argument("omp_run: L exceeds the dictionary size");
    if (frame.f_matrix.rows() != f_.rows() || frame.f_matrix.cols() != f_.cols())
        throw std::invalid_argument("omp_run: frame pilot matrix does not match the solver");

    EstimateReport rep;
    const int K = frame.users();
    rep.supports.resize(static_cast<std::size_t>(K));
    rep.doas.resize(static_cast<std::size_t>(K));
    rep.ranges.resize(static_cast<std::size_t>(K));
    rep.delta_doa.resize(static_cast<std::size_t>(K));
    rep.delta_range.resize(static_cast<std::size_t>(K));
    rep.coefficients.resize(static_cast<std::size_t>(K));
    rep.condition.resize(static_cast<std::size_t>(K));
    rep.residual_norms.resize(static_cast<std::size_t>(K));

    for (int k = 0; k < K; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const Eigen::MatrixXcd& Y = frame.y[ks];
        if (Y.cols() != M) throw std::invalid_argument("omp_run: observation has the wrong subcarrier count");
        Eigen::MatrixXcd R = Y;
        std::vector<int>& support = rep.supports[ks];
        std::vector<bool> used(static_cast<std::size_t>(dict.size()), false);
        Eigen::MatrixXd& rn = rep.residual_norms[ks];
        rn.resize(L + 1, M);
        rn.row(0) = R.colwise().norm();
        std::vector<linalg::PseudoInverse<double>> pinv(static_cast<std::size_t>(M));

        for (int l = 0; l < L; ++l) {
            const Eigen::VectorXd score = selector_scores(R, options.normalized_selector);
            int best = -1;
            double best_score = -1;
            for (int q = 0; q < dict.size(); ++q) {
                if (used[static_cast<std::size_t>(q)]) continue;
                if (score[q] > best_score) {
                    best_score = score[q];
                    best = q;
                }
            }
            used[static_cast<std::size_t>(best)] = true;
            support.push_back(best);

            for (int m = 0; m < M; ++m) {
                const Eigen::MatrixXcd& psi = sensing(m);
                Eigen::MatrixXcd sub(psi.rows(), static_cast<Eigen::Index>(support.size()));
                for (std::size_t j = 0; j < support.size(); ++j)
                    sub.col(static_cast<Eigen::Index>(j)) = psi.col(support[j]);
                pinv[static_cast<std::size_t>(m)] = linalg::pseudo_inverse(sub, options.pinv_floor);
                R.col(m) = pinv[static_cast<std::size_t>(m)].residual(Y.col(m));
            }
            rn.row(l + 1) = R.colwise().norm();
        }

        Eigen::MatrixXcd& u = rep.coefficients[ks];
        u.resize(L, M);
        double worst = 0;
        for (int m = 0; m < M; ++m) {
            u.col(m) = pinv[static_cast<std::size_t>(m)].solve(Y.col(m));
            worst = std::max(worst, pinv[static_cast<std::size_t>(m)].condition);
        }
        rep.condition[ks] = worst;

        rep.delta_doa[ks].resize(L, M);
        rep.delta_range[ks].resize(L, M);
        for (int l = 0; l < L; ++l) {
            const Point& p = dict.physical_point(support[static_cast<std::size_t>(l)]);
            rep.doas[ks].push_back(p.sin_doa);
            rep.ranges[ks].push_back(p.range_m);
            for (int m = 0; m < M; ++m) {
                const double eta = options.eta_source == EtaSource::dictionary ? dict.eta(m) : 1.0;
                const BeamSplitDelta<double> d = nb_deltas(p, eta);
                rep.delta_doa[ks](l, m) = d.doa;
                rep.delta_range[ks](l, m) = d.range;
            }
        }
    }

    rep.h_hat = reconstruct(rep, dict.geometry(), dict.subcarriers(), options.basis);
    return rep;
}

EstimateReport omp_run(const PilotFrame& frame, const Dictionary& dict, int L, EtaSource eta_source)
{
    OmpSolver solver(dict, frame.f_matrix);
    OmpOptions opt;
    opt.paths = L;
    opt.eta_source = eta_source;
    return solver.run(frame, opt);
}

ChannelTensor reconstruct(const EstimateReport& report, const SystemConfig& cfg, ReconstructionBasis basis)
{
    return reconstruct(report, cfg.geometry(), cfg.subcarrier_grid(), basis);
}

ChannelTensor reconstruct(const EstimateReport& report, const Geometry& geom, const Subcarriers& sc,
                          ReconstructionBasis basis)
{
    ChannelTensor out;
    out.h.reserve(report.supports.size());
    for (std::size_t k = 0; k < report.supports.size(); ++k) {
        const Eigen::MatrixXcd& u = report.coefficients[k];
        const Eigen::Index L = u.rows();
        if (u.cols() != sc.m_count) throw std::invalid_argument("reconstruct: coefficient/subcarrier mismatch");
        Eigen::MatrixXcd hk(geom.n_antennas, sc.m_count);
        Eigen::MatrixXcd xi(geom.n_antennas, L);
        for (int m = 0; m < sc.m_count; ++m) {
            const double f = basis == ReconstructionBasis::subcarrier_exact ? sc.freq(m) : sc.carrier_hz;
            if (m == 0 || basis == ReconstructionBasis::subcarrier_exact)
                for (Eigen::Index l = 0; l < L; ++l) {
                    const Point p{report.doas[k][static_cast<std::size_t>(l)],
                                  report.ranges[k][static_cast<std::size_t>(l)]};
                    xi.col(l) = steering_vector(p, f, geom, SteeringMode::exact);
                }
            hk.col(m) = xi * u.col(m);
        }
        out.h.push_back(std::move(hk));
    }
    return out;
}

std::vector<double> nmse_per_user(const ChannelTensor& h_true, const ChannelTensor& h_hat)
{
    if (h_true.users() != h_hat.users()) throw std::invalid_argument("nmse: user count mismatch");
    std::vector<double> out;
    out.reserve(h_true.h.size());
    for (std::size_t k = 0; k < h_true.h.size(); ++k) {
        if (h_true.h[k].rows() != h_hat.h[k].rows() || h_true.h[k].cols() != h_hat.h[k].cols())
            throw std::invalid_argument("nmse: tensor shape mismatch");
        const double power = h_true.h[k].squaredNorm();
        if (!(power > 0)) throw std::invalid_argument("nmse: zero-power reference channel");
        out.push_back((h_hat.h[k] - h_true.h[k]).squaredNorm() / power);
    }
    return out;
}

double nmse(const ChannelTensor& h_true, const ChannelTensor& h_hat)
{
    const std::vector<double> per = nmse_per_user(h_true, h_hat);
    if (per.empty()) throw std::invalid_argument("nmse: no users");
    double s = 0;
    for (double v : per) s += v;
    return s / double(per.size());
}

void score(EstimateReport& report, const ChannelTensor& h_true)
{
    report.nmse = nmse_per_user(h_true, report.h_hat);
}

} // namespace nfsplit

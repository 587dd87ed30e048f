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

#include "nfsplit/fedlearn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nfsplit {

Mlp::Mlp(int inputs, std::vector<int> hidden, int outputs)
{
    if (inputs < 1 || outputs < 1) throw std::invalid_argument("Mlp: layer widths must be positive");
    sizes_.push_back(inputs);
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("Mlp: layer widths must be positive");
        sizes_.push_back(h);
    }
    sizes_.push_back(outputs);
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
        offsets_.push_back(count_);
        count_ += Eigen::Index(sizes_[l]) * sizes_[l - 1] + sizes_[l];
    }
}

Mlp Mlp::for_config(const SystemConfig& cfg, std::vector<int> hidden)
{
    return Mlp(3 * cfg.pilots, std::move(hidden), 2 * cfg.n_antennas);
}

Eigen::VectorXd Mlp::init(std::uint64_t seed) const
{
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(count_);
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
        const double s = std::sqrt(2.0 / sizes_[l - 1]);
        const Eigen::Index n = Eigen::Index(sizes_[l]) * sizes_[l - 1];
        for (Eigen::Index i = 0; i < n; ++i) theta[offsets_[l - 1] + i] = s * nd(rng);
    }
    return theta;
}

Eigen::MatrixXd Mlp::forward(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X) const
{
    if (theta.size() != count_) throw std::invalid_argument("Mlp::forward: parameter vector has the wrong size");
    if (X.rows() != inputs()) throw std::invalid_argument("Mlp::forward: input has the wrong width");
    Eigen::MatrixXd a = X;
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        Eigen::Map<const Eigen::MatrixXd> W(theta.data() + offsets_[l], out, in);
        Eigen::Map<const Eigen::VectorXd> b(theta.data() + offsets_[l] + Eigen::Index(out) * in, out);
        Eigen::MatrixXd z = W * a;
        z.colwise() += b;
        if (l + 1 < layers) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

double Mlp::loss(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const
{
    if (X.cols() == 0) throw std::invalid_argument("Mlp::loss: empty dataset");
    return (forward(theta, X) - Y).squaredNorm() / double(X.cols());
}

std::pair<double, Eigen::VectorXd> Mlp::loss_and_gradient(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X,
                                                          const Eigen::MatrixXd& Y, double dropout, Rng* rng) const
{
    if (theta.size() != count_) throw std::invalid_argument("Mlp: parameter vector has the wrong size");
    if (X.cols() == 0) throw std::invalid_argument("local_gradient: empty dataset");
    if (X.rows() != inputs() || Y.rows() != outputs() || Y.cols() != X.cols())
        throw std::invalid_argument("Mlp: dataset shape does not match the network");
    if (dropout < 0 || dropout >= 1) throw std::invalid_argument("Mlp: dropout must lie in [0, 1)");
    if (dropout > 0 && rng == nullptr) throw std::invalid_argument("Mlp: dropout needs a random stream");

    const std::size_t layers = sizes_.size() - 1;
    const double D = double(X.cols());
    // acts[l] is the input of layer l; masks[l] marks live units of acts[l + 1]
    std::vector<Eigen::MatrixXd> acts;
    std::vector<Eigen::MatrixXd> masks;
    acts.reserve(layers + 1);
    masks.reserve(layers);
    acts.push_back(X);
    std::bernoulli_distribution keep(1.0 - dropout);
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        Eigen::Map<const Eigen::MatrixXd> W(theta.data() + offsets_[l], out, in);
        Eigen::Map<const Eigen::VectorXd> b(theta.data() + offsets_[l] + Eigen::Index(out) * in, out);
        Eigen::MatrixXd z = W * acts.back();
        z.colwise() += b;
        if (l + 1 < layers) {
            Eigen::MatrixXd mask = (z.array() > 0).cast<double>();
            if (dropout > 0)
                for (Eigen::Index i = 0; i < mask.size(); ++i)
                    mask.data()[i] *= keep(*rng) ? 1.0 / (1.0 - dropout) : 0.0;
            z = z.cwiseProduct(mask);
            masks.push_back(std::move(mask));
        }
        acts.push_back(std::move(z));
    }

    Eigen::MatrixXd delta = acts.back() - Y;
    const double loss = delta.squaredNorm() / D;
    delta *= 2.0 / D;

    Eigen::VectorXd grad(count_);
    for (std::size_t l = layers; l-- > 0;) {
        const int in = sizes_[l], out = sizes_[l + 1];
        Eigen::Map<Eigen::MatrixXd> dW(grad.data() + offsets_[l], out, in);
        Eigen::Map<Eigen::VectorXd> db(grad.data() + offsets_[l] + Eigen::Index(out) * in, out);
        dW.noalias() = delta * acts[l].transpose();
        db = delta.rowwise().sum();
        if (l > 0) {
            Eigen::Map<const Eigen::MatrixXd> W(theta.data() + offsets_[l], out, in);
            Eigen::MatrixXd back = W.transpose() * delta;
            delta = back.cwiseProduct(masks[l - 1]);
        }
    }
    return {loss, std::move(grad)};
}

Eigen::VectorXd model_forward(const Mlp& net, const Eigen::VectorXd& theta, const Eigen::VectorXd& input)
{
    return net.forward(theta, input);
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& raw, int pilots)
{
    if (raw.rows() != 3 * pilots || raw.cols() == 0) throw std::invalid_argument("Standardizer: bad input block");
    Standardizer s;
    for (int c = 0; c < 3; ++c) {
        const auto block = raw.middleRows(Eigen::Index(c) * pilots, pilots);
        const double mean = block.mean();
        const double var = (block.array() - mean).square().mean();
        s.mean[c] = mean;
        s.stdev[c] = var > 0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Standardizer Standardizer::average(std::span<const Standardizer> parts)
{
    if (parts.empty()) throw std::invalid_argument("Standardizer::average: nothing to average");
    Standardizer s;
    for (int c = 0; c < 3; ++c) {
        s.mean[c] = 0;
        s.stdev[c] = 0;
        for (const Standardizer& p : parts) {
            s.mean[c] += p.mean[c];
            s.stdev[c] += p.stdev[c];
        }
        s.mean[c] /= double(parts.size());
        s.stdev[c] /= double(parts.size());
    }
    return s;
}

void Standardizer::apply(Eigen::MatrixXd& inputs, int pilots) const
{
    for (int c = 0; c < 3; ++c) {
        auto block = inputs.middleRows(Eigen::Index(c) * pilots, pilots);
        block = (block.array() - mean[c]) / stdev[c];
    }
}

Eigen::Index dataset_size(const SystemConfig& cfg, const DatasetOptions& opt)
{
    return Eigen::Index(opt.snrs_db.size()) * cfg.subcarriers * opt.scenarios * opt.augment;
}

std::pair<double, double> user_sector(int k, int users)
{
    const double w = std::numbers::pi / users;
    return {-std::numbers::pi / 2 + w * k, -std::numbers::pi / 2 + w * (k + 1)};
}

namespace {

void put_input(Eigen::MatrixXd& X, Eigen::Index col, const Eigen::VectorXcd& y)
{
    const Eigen::Index P = y.size();
    for (Eigen::Index p = 0; p < P; ++p) {
        X(p, col) = y[p].real();
        X(P + p, col) = y[p].imag();
        double a = std::arg(y[p]);
        if (a <= -std::numbers::pi) a = std::numbers::pi;
        X(2 * P + p, col) = a;
    }
}

void put_vector(Eigen::MatrixXd& Y, Eigen::Index col, const Eigen::VectorXcd& h)
{
    Y.col(col).head(h.size()) = h.real();
    Y.col(col).tail(h.size()) = h.imag();
}

} // namespace

LocalDataset build_dataset(const SystemConfig& cfg, const DatasetOptions& opt, const OmpSolver& solver, int user,
                           std::uint64_t seed)
{
    cfg.validate();
    if (opt.snrs_db.empty()) throw std::invalid_argument("build_dataset: empty SNR list");
    if (opt.scenarios < 1 || opt.augment < 1) throw std::invalid_argument("build_dataset: V and G must be >= 1");
    if (user < 0 || user >= cfg.users) throw std::invalid_argument("build_dataset: user index out of range");
    const Eigen::MatrixXcd& F = solver.pilots();
    const int P = static_cast<int>(F.rows());
    const int N = cfg.n_antennas;
    const int M = cfg.subcarriers;
    const auto [lo, hi] = user_sector(user, cfg.users);

    LocalDataset out;
    out.owner = user;
    out.pilots = P;
    const Eigen::Index D = dataset_size(cfg, opt);
    out.inputs.resize(3 * P, D);
    out.labels.resize(2 * N, D);
    if (opt.keep_truth) out.truth.resize(2 * N, D);

    OmpOptions omp;
    omp.paths = opt.paths;
    Eigen::Index col = 0;
    const auto k = static_cast<std::uint64_t>(user);
    for (int v = 0; v < opt.scenarios; ++v) {
        Rng rng(derive_seed(seed, {stream::dataset, k, static_cast<std::uint64_t>(v)}));
        ChannelTensor h;
        h.h.push_back(synthesize_user(sample_user_paths(cfg, opt.paths, lo, hi, rng), cfg));
        h = normalize_for_snr(h).first;
        const PilotFrame clean = sound(h, F, 0.0, 0);
        const EstimateReport rep = solver.run(clean, omp);
        const Eigen::MatrixXcd& label = rep.h_hat.h[0];

        for (std::size_t s = 0; s < opt.snrs_db.size(); ++s) {
            const double noise_var = std::pow(10.0, -opt.snrs_db[s] / 10.0);
            for (int g = 0; g < opt.augment; ++g) {
                const PilotFrame noisy =
                    sound(h, F, noise_var,
                          derive_seed(seed, {stream::noise, k, static_cast<std::uint64_t>(v), s,
                                             static_cast<std::uint64_t>(g)}));
                for (int m = 0; m < M; ++m, ++col) {
                    put_input(out.inputs, col, noisy.y[0].col(m));
                    put_vector(out.labels, col, label.col(m));
                    if (opt.keep_truth) put_vector(out.truth, col, h.h[0].col(m));
                }
            }
        }
    }
    out.stats = Standardizer::fit(out.inputs, P);
    out.stats.apply(out.inputs, P);
    return out;
}

std::vector<LocalDataset> build_datasets(const SystemConfig& cfg, const DatasetOptions& opt, const OmpSolver& solver,
                                         std::uint64_t seed)
{
    std::vector<LocalDataset> out;
    out.reserve(static_cast<std::size_t>(cfg.users));
    for (int k = 0; k < cfg.users; ++k) out.push_back(build_dataset(cfg, opt, solver, k, seed));
    return out;
}

Eigen::VectorXd fedavg_round(const Eigen::VectorXd& theta, std::span<const Eigen::VectorXd> gradients, double lr)
{
    if (gradients.empty()) throw std::invalid_argument("fedavg_round: no gradients");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(theta.size());
    for (const auto& g : gradients) {
        if (g.size() != theta.size()) throw std::invalid_argument("fedavg_round: gradient size mismatch");
        mean += g;
    }
    mean /= double(gradients.size());
    return theta - lr * mean;
}

TrainResult train(const Mlp& net, Eigen::VectorXd theta0, std::span<const LocalDataset> datasets,
                  const TrainOptions& opt, const RoundCallback& on_round)
{
    if (datasets.empty()) throw std::invalid_argument("train: no local datasets");
    if (opt.rounds < 0) throw std::invalid_argument("train: rounds must be >= 0");
    if (theta0.size() != net.parameter_count()) throw std::invalid_argument("train: parameter vector size mismatch");

    TrainResult res;
    res.theta = std::move(theta0);
    res.loss.reserve(static_cast<std::size_t>(opt.rounds));
    std::vector<Eigen::VectorXd> grads(datasets.size());
    double initial = 0;
    for (int t = 0; t < opt.rounds; ++t) {
        double loss = 0;
        for (std::size_t k = 0; k < datasets.size(); ++k) {
            const LocalDataset& d = datasets[k];
            Rng rng(derive_seed(opt.seed, {stream::batches, static_cast<std::uint64_t>(t), k}));
            std::pair<double, Eigen::VectorXd> lg;
            if (opt.batch_size > 0 && opt.batch_size < d.count()) {
                std::vector<Eigen::Index> idx(static_cast<std::size_t>(d.count()));
                std::iota(idx.begin(), idx.end(), Eigen::Index(0));
                for (int i = 0; i < opt.batch_size; ++i) {
                    std::uniform_int_distribution<std::size_t> pick(std::size_t(i), idx.size() - 1);
                    std::swap(idx[std::size_t(i)], idx[pick(rng)]);
                }
                idx.resize(static_cast<std::size_t>(opt.batch_size));
                lg = net.loss_and_gradient(res.theta, d.inputs(Eigen::all, idx), d.labels(Eigen::all, idx),
                                           opt.dropout, &rng);
            } else {
                lg = net.loss_and_gradient(res.theta, d.inputs, d.labels, opt.dropout, &rng);
            }
            loss += lg.first;
            grads[k] = std::move(lg.second);
        }
        loss /= double(datasets.size());
        if (t == 0) initial = loss;
        if (!std::isfinite(loss) || loss > 1e6 * initial)
            throw std::runtime_error("train: loss diverged at round " + std::to_string(t) + " (" + std::to_string(loss)
                                     + " vs initial " + std::to_string(initial) + ")");
        res.loss.push_back(loss);
        res.theta = fedavg_round(res.theta, grads, opt.lr);
        if (on_round) on_round(t, res.theta, loss);
    }
    return res;
}

double regression_nmse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth)
{
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw std::invalid_argument("regression_nmse: shape mismatch");
    const double p = truth.squaredNorm();
    if (!(p > 0)) throw std::invalid_argument("regression_nmse: zero-power reference");
    return (estimate - truth).squaredNorm() / p;
}

std::uint64_t overhead_cl(const OverheadInputs& in)
{
    const std::uint64_t per = 3 * in.rf_chains + (in.labels ? 2 * in.antennas : 0);
    std::uint64_t total = 0;
    for (std::uint64_t d : in.samples) total += d * per;
    return total;
}

std::uint64_t overhead_fl(const OverheadInputs& in)
{
    return 2 * in.parameters * in.rounds * in.users();
}

// ---- binary files ---------------------------------------------------------

namespace {

constexpr char kDatasetMagic[8] = {'N', 'F', 'S', 'D', 'S', 'E', 'T', '1'};
constexpr char kParamsMagic[8] = {'N', 'F', 'S', 'P', 'A', 'R', 'M', '1'};

std::uint64_t to_le(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
}

class Writer {
public:
    Writer(const std::filesystem::path& p, const char (&magic)[8]) : out_(p, std::ios::binary | std::ios::trunc)
    {
        if (!out_) throw std::runtime_error("cannot open " + p.string() + " for writing");
        out_.write(magic, 8);
    }
    void u64(std::uint64_t v)
    {
        v = to_le(v);
        out_.write(reinterpret_cast<const char*>(&v), 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void block(const double* p, Eigen::Index n)
    {
        for (Eigen::Index i = 0; i < n; ++i) f64(p[i]);
    }
    void finish(const std::filesystem::path& p)
    {
        out_.flush();
        if (!out_) throw std::runtime_error("write failed: " + p.string());
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    Reader(const std::filesystem::path& p, const char (&magic)[8]) : in_(p, std::ios::binary), path_(p)
    {
        if (!in_) throw std::runtime_error("cannot open " + p.string());
        char tag[8];
        in_.read(tag, 8);
        if (!in_ || !std::equal(tag, tag + 8, magic))
            throw std::runtime_error(p.string() + ": wrong file type (bad magic tag)");
    }
    std::uint64_t u64()
    {
        std::uint64_t v = 0;
        in_.read(reinterpret_cast<char*>(&v), 8);
        if (!in_) throw std::runtime_error(path_.string() + ": truncated file");
        return to_le(v);
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void block(double* p, Eigen::Index n)
    {
        for (Eigen::Index i = 0; i < n; ++i) p[i] = f64();
    }
    Eigen::Index dim(std::uint64_t limit = std::uint64_t(1) << 32)
    {
        const std::uint64_t v = u64();
        if (v > limit) throw std::runtime_error(path_.string() + ": implausible dimension " + std::to_string(v));
        return static_cast<Eigen::Index>(v);
    }

private:
    std::ifstream in_;
    std::filesystem::path path_;
};

} // namespace

void write_dataset(const std::filesystem::path& path, const LocalDataset& d)
{
    Writer w(path, kDatasetMagic);
    w.u64(static_cast<std::uint64_t>(d.owner));
    w.u64(static_cast<std::uint64_t>(d.pilots));
    w.u64(static_cast<std::uint64_t>(d.inputs.rows()));
    w.u64(static_cast<std::uint64_t>(d.labels.rows()));
    w.u64(static_cast<std::uint64_t>(d.count()));
    w.u64(static_cast<std::uint64_t>(d.truth.cols()));
    for (int c = 0; c < 3; ++c) w.f64(d.stats.mean[c]);
    for (int c = 0; c < 3; ++c) w.f64(d.stats.stdev[c]);
    w.block(d.inputs.data(), d.inputs.size());
    w.block(d.labels.data(), d.labels.size());
    w.block(d.truth.data(), d.truth.size());
    w.finish(path);
}

LocalDataset read_dataset(const std::filesystem::path& path)
{
    Reader r(path, kDatasetMagic);
    LocalDataset d;
    d.owner = static_cast<int>(r.dim());
    d.pilots = static_cast<int>(r.dim());
    const Eigen::Index in = r.dim(), out = r.dim(), count = r.dim(), truth = r.dim();
    if (in != 3 * d.pilots || (truth != 0 && truth != count))
        throw std::runtime_error(path.string() + ": inconsistent dataset header");
    for (int c = 0; c < 3; ++c) d.stats.mean[c] = r.f64();
    for (int c = 0; c < 3; ++c) d.stats.stdev[c] = r.f64();
    d.inputs.resize(in, count);
    d.labels.resize(out, count);
    d.truth.resize(out, truth);
    r.block(d.inputs.data(), d.inputs.size());
    r.block(d.labels.data(), d.labels.size());
    r.block(d.truth.data(), d.truth.size());
    return d;
}

void write_params(const std::filesystem::path& path, const Mlp& net, const Eigen::VectorXd& theta)
{
    if (theta.size() != net.parameter_count()) throw std::invalid_argument("write_params: size mismatch");
    Writer w(path, kParamsMagic);
    w.u64(net.sizes().size());
    for (int s : net.sizes()) w.u64(static_cast<std::uint64_t>(s));
    w.u64(static_cast<std::uint64_t>(theta.size()));
    w.block(theta.data(), theta.size());
    w.finish(path);
}

std::pair<Mlp, Eigen::VectorXd> read_params(const std::filesystem::path& path)
{
    Reader r(path, kParamsMagic);
    const Eigen::Index layers = r.dim(64);
    if (layers < 2) throw std::runtime_error(path.string() + ": network needs at least two layer sizes");
    std::vector<int> sizes;
    for (Eigen::Index i = 0; i < layers; ++i) sizes.push_back(static_cast<int>(r.dim(1 << 24)));
    Mlp net(sizes.front(), std::vector<int>(sizes.begin() + 1, sizes.end() - 1), sizes.back());
    const Eigen::Index z = r.dim();
    if (z != net.parameter_count()) throw std::runtime_error(path.string() + ": parameter count does not match layers");
    Eigen::VectorXd theta(z);
    r.block(theta.data(), z);
    return {std::move(net), std::move(theta)};
}

} // namespace nfsplit

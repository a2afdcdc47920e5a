#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "risce/cgan.hpp"
#include "risce/dataset.hpp"
#include "risce/nn.hpp"
#include "risce/pilot.hpp"

namespace risce {

/// ||est - truth||_F^2 / ||truth||_F^2.
inline double nmse(const MatrixXcd& estimated, const MatrixXcd& truth) {
    if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols())
        throw std::invalid_argument("nmse: shape mismatch");
    const double denom = truth.squaredNorm();
    if (denom <= 0.0) throw std::invalid_argument("nmse: zero truth");
    return (estimated - truth).squaredNorm() / denom;
}

/// Monte-Carlo mean of a single-trial NMSE functor over derived RNG streams.
template <typename TrialFn>
inline double nmse_mc(TrialFn&& trial, int trials, const Rng& base) {
    if (trials < 1) throw std::invalid_argument("nmse_mc: trials must be >= 1");
    double acc = 0.0;
    for (int i = 0; i < trials; ++i) {
        Rng r = base.derive(0x3ca1, static_cast<std::uint64_t>(i) + 1);
        acc += trial(r);
    }
    return acc / trials;
}

/// LS sensing inversion: A_hat^H = Y_avg X^H / P_tx, exploiting X X^H = P_tx I.
inline MatrixXcd ls_sensing(const MatrixXcd& Y_avg, const PilotMatrix& X) {
    if (Y_avg.rows() != X.X.rows() || Y_avg.cols() != X.X.cols())
        throw std::invalid_argument("ls_sensing: dimension mismatch");
    const double p_tx = X.X.squaredNorm() / static_cast<double>(X.X.rows());
    return (Y_avg * X.X.adjoint() / p_tx).adjoint();
}

/// LS communication inversion: G_hat^H = (1/N) Theta Y_ue X^H / P_tx.
inline MatrixXcd ls_comm(const MatrixXcd& Y_ue, const PhaseMatrix& Theta, const PilotMatrix& X) {
    const auto N = Theta.Theta.rows();
    if (Y_ue.rows() != Theta.Theta.cols() || Y_ue.cols() != X.X.cols())
        throw std::invalid_argument("ls_comm: dimension mismatch");
    const double p_tx = X.X.squaredNorm() / static_cast<double>(X.X.rows());
    return ((Theta.Theta * Y_ue * X.X.adjoint()) / (static_cast<double>(N) * p_tx)).adjoint();
}

/// Plain regression network sharing the CGAN's data conventions: standardized
/// inputs, rho-scaled targets, rho^-1 rescaling at inference.
struct RegressionModel {
    NetworkSpec spec;
    Parameters params;
    Link link = Link::sensing;
    double rho = 1e4;
    SystemConfig config;
};

struct RegressionTrainConfig {
    int batch_size = 16;
    double lr = 2e-4;
    int epochs = 50;
    std::uint64_t seed = 1;
};

namespace detail {

inline MatrixXd raw_inputs_standardized(const Dataset& ds) {
    if (ds.pairs.empty()) throw std::invalid_argument("baseline: empty dataset");
    const auto F = ds.pairs.front().R.size();
    MatrixXd in(static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(ds.pairs.size()));
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        auto [r, rec] = standardize(ds.pairs[i].R);
        (void)rec;
        for (std::size_t j = 0; j < F; ++j)
            in(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r[j];
    }
    return in;
}

inline MatrixXd scaled_targets(const Dataset& ds, double rho) {
    const auto L = ds.pairs.front().O.size();
    MatrixXd t(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(ds.pairs.size()));
    for (std::size_t i = 0; i < ds.pairs.size(); ++i)
        for (std::size_t j = 0; j < L; ++j)
            t(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rho * ds.pairs[i].O[j];
    return t;
}

} // namespace detail

/// Untrained FFN with the comparison architecture (two hidden layers of 256).
inline RegressionModel build_ffn(const Dataset& ds, std::uint64_t seed) {
    if (ds.pairs.empty()) throw std::invalid_argument("build_ffn: empty dataset");
    const int in = static_cast<int>(ds.pairs.front().R.size());
    const int out = static_cast<int>(ds.pairs.front().O.size());
    RegressionModel m;
    m.link = ds.meta.link;
    m.rho = ds.meta.config.rho;
    m.config = ds.meta.config;
    m.spec.input = {in, 1};
    m.spec.layers = {LayerSpec::dense_layer(in, 256), LayerSpec::leaky_relu_layer(0.2),
                     LayerSpec::dense_layer(256, 256), LayerSpec::leaky_relu_layer(0.2),
                     LayerSpec::dense_layer(256, out)};
    Rng rng = Rng(seed).derive(0xffa);
    m.params = init_parameters(m.spec, rng);
    return m;
}

/// FFN baseline trained with per-element MSE and Adam.
inline RegressionModel ffn_baseline(const Dataset& train_ds, const RegressionTrainConfig& cfg) {
    RegressionModel m = build_ffn(train_ds, cfg.seed);
    const MatrixXd inputs = detail::raw_inputs_standardized(train_ds);
    const MatrixXd targets = detail::scaled_targets(train_ds, m.rho);
    const auto n = inputs.cols();
    const double L = static_cast<double>(targets.rows());
    AdamState state = AdamState::create(m.spec);
    Rng rng = Rng(cfg.seed).derive(0xffb);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
            MatrixXd xb(inputs.rows(), b), tb(targets.rows(), b);
            for (Eigen::Index j = 0; j < b; ++j) {
                xb.col(j) = inputs.col(order[static_cast<std::size_t>(start + j)]);
                tb.col(j) = targets.col(order[static_cast<std::size_t>(start + j)]);
            }
            ForwardCache cache;
            const MatrixXd y = forward(m.spec, m.params, xb, Mode::train, &cache);
            const MatrixXd dy = 2.0 * (y - tb) / (static_cast<double>(b) * L);
            BackwardResult bres = backward(m.spec, m.params, cache, dy);
            adam_step(m.params, bres.grads, state, cfg.lr);
        }
    }
    return m;
}

/// Extreme learning machine: fixed random 256-unit hidden layer, output
/// weights solved by ridge-regularized least squares in one shot.
inline RegressionModel elm_baseline(const Dataset& train_ds, std::uint64_t seed, double ridge = 1e-6) {
    if (train_ds.pairs.empty()) throw std::invalid_argument("elm_baseline: empty dataset");
    const int in = static_cast<int>(train_ds.pairs.front().R.size());
    const int out = static_cast<int>(train_ds.pairs.front().O.size());
    constexpr int hidden = 256;
    RegressionModel m;
    m.link = train_ds.meta.link;
    m.rho = train_ds.meta.config.rho;
    m.config = train_ds.meta.config;
    m.spec.input = {in, 1};
    m.spec.layers = {LayerSpec::dense_layer(in, hidden), LayerSpec::leaky_relu_layer(0.2),
                     LayerSpec::dense_layer(hidden, out)};
    Rng rng = Rng(seed).derive(0xe1a);
    m.params = init_parameters(m.spec, rng);

    const MatrixXd inputs = detail::raw_inputs_standardized(train_ds);
    const MatrixXd targets = detail::scaled_targets(train_ds, m.rho);
    // Hidden features with an appended bias row.
    NetworkSpec hidden_spec;
    hidden_spec.input = m.spec.input;
    hidden_spec.layers = {m.spec.layers[0], m.spec.layers[1]};
    Parameters hidden_params;
    hidden_params.layers = {m.params.layers[0], m.params.layers[1]};
    MatrixXd phi(hidden + 1, inputs.cols());
    phi.topRows(hidden) = forward(hidden_spec, hidden_params, inputs, Mode::eval);
    phi.row(hidden).setOnes();
    const MatrixXd gram =
        phi * phi.transpose() + ridge * MatrixXd::Identity(hidden + 1, hidden + 1);
    const MatrixXd W_aug = (targets * phi.transpose()) * gram.ldlt().solve(MatrixXd::Identity(hidden + 1, hidden + 1));
    m.params.layers[2].W = W_aug.leftCols(hidden);
    m.params.layers[2].b = W_aug.col(hidden);
    return m;
}

/// Standardize, run the regression network, undo rho scaling, reassemble.
inline MatrixXcd estimate_regression(const RegressionModel& m, const std::vector<double>& raw_R) {
    auto [r_std, rec] = standardize(raw_R);
    (void)rec;
    VectorXd x(static_cast<Eigen::Index>(r_std.size()));
    for (std::size_t i = 0; i < r_std.size(); ++i) x(static_cast<Eigen::Index>(i)) = r_std[i];
    const MatrixXd out = forward_eval(m.spec, m.params, x);
    const int rows = m.config.M;
    const int cols = (m.link == Link::sensing) ? m.config.M : m.config.N;
    if (out.rows() != 2 * rows * cols)
        throw std::invalid_argument("estimate_regression: output size mismatch");
    MatrixXcd est(rows, cols);
    const int nel = rows * cols;
    for (int i = 0; i < nel; ++i)
        est.data()[i] = cd(out(i, 0) / m.rho, out(nel + i, 0) / m.rho);
    return est;
}

} // namespace risce

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "risce/config.hpp"
#include "risce/dataset.hpp"
#include "risce/nn.hpp"

namespace risce {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double log_sigmoid(double z) {
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

struct TrainConfig {
    int batch_size = 16;
    double alpha = 100.0;
    double lr_generator = 2e-4;
    double lr_discriminator = 2e-5;
    int epochs = 50;
    std::uint64_t seed = 1;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (alpha < 0) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
        if (!(lr_generator > 0) || !(lr_discriminator > 0))
            throw std::invalid_argument("TrainConfig: learning rates must be > 0");
        if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    }
};

struct EpochStats {
    double loss_d = 0.0;
    double loss_g = 0.0;
    double gen_mse = 0.0; // per-element MSE of generator output vs scaled target
};

struct CganModel {
    NetworkSpec gen_spec, disc_spec; // disc_spec ends with a sigmoid layer
    Parameters gen_params, disc_params;
    Link link = Link::sensing;
    double rho = 1e4;
    SystemConfig config;
    std::vector<EpochStats> history;
};

/// Dense generator/discriminator pair for the sensing link.
inline CganModel build_se_cgan(const SystemConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int in = 2 * cfg.M * cfg.P();
    const int out = 2 * cfg.M * cfg.M;
    CganModel m;
    m.link = Link::sensing;
    m.rho = cfg.rho;
    m.config = cfg;
    m.gen_spec.input = {in, 1};
    m.gen_spec.layers = {
        LayerSpec::dense_layer(in, 100), LayerSpec::batchnorm_layer(100), LayerSpec::leaky_relu_layer(0.2),
        LayerSpec::dense_layer(100, 200), LayerSpec::batchnorm_layer(200), LayerSpec::leaky_relu_layer(0.2),
        LayerSpec::dense_layer(200, out)};
    m.disc_spec.input = {out, 1};
    m.disc_spec.layers = {
        LayerSpec::dense_layer(out, 100), LayerSpec::batchnorm_layer(100), LayerSpec::leaky_relu_layer(0.2),
        LayerSpec::dense_layer(100, 200), LayerSpec::batchnorm_layer(200), LayerSpec::leaky_relu_layer(0.2),
        LayerSpec::dense_layer(200, 1), LayerSpec::sigmoid_layer()};
    Rng rng(seed);
    Rng gr = rng.derive(0, 1);
    Rng dr = rng.derive(0, 2);
    m.gen_params = init_parameters(m.gen_spec, gr);
    m.disc_params = init_parameters(m.disc_spec, dr);
    return m;
}

/// Convolutional pair for the communication link. The stacked UE observation
/// (length 2CP) is arranged as 2P channels over C sub-frame positions.
inline CganModel build_ce_cgan(const SystemConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    constexpr int kFilters = 132, kKernel = 4, kStride = 1;
    if (cfg.C() < kKernel)
        throw std::invalid_argument("build_ce_cgan: C must be >= conv kernel size 4");
    const int ch_in = 2 * cfg.P();
    const int out = 2 * cfg.M * cfg.N;
    if (out < kKernel)
        throw std::invalid_argument("build_ce_cgan: discriminator input shorter than kernel");
    CganModel m;
    m.link = Link::communication;
    m.rho = cfg.rho;
    m.config = cfg;
    const int gen_conv_len = conv_output_length(cfg.C(), kKernel, kStride);
    m.gen_spec.input = {ch_in, cfg.C()};
    m.gen_spec.layers = {
        LayerSpec::conv1d_layer(ch_in, kFilters, kKernel, kStride),
        LayerSpec::batchnorm_layer(kFilters), LayerSpec::leaky_relu_layer(0.2),
        LayerSpec::flatten_layer(),
        LayerSpec::dense_layer(gen_conv_len * kFilters, 500),
        LayerSpec::batchnorm_layer(500), LayerSpec::leaky_relu_layer(0.2),
        LayerSpec::dense_layer(500, out)};
    const int disc_conv_len = conv_output_length(out, kKernel, kStride);
    m.disc_spec.input = {1, out};
    m.disc_spec.layers = {
        LayerSpec::conv1d_layer(1, kFilters, kKernel, kStride),
        LayerSpec::batchnorm_layer(kFilters), LayerSpec::leaky_relu_layer(0.2),
        LayerSpec::flatten_layer(),
        LayerSpec::dense_layer(disc_conv_len * kFilters, 500),
        LayerSpec::batchnorm_layer(500), LayerSpec::leaky_relu_layer(0.2),
        LayerSpec::dense_layer(500, 1), LayerSpec::sigmoid_layer()};
    Rng rng(seed);
    Rng gr = rng.derive(1, 1);
    Rng dr = rng.derive(1, 2);
    m.gen_params = init_parameters(m.gen_spec, gr);
    m.disc_params = init_parameters(m.disc_spec, dr);
    return m;
}

/// Rearrange a raw (already standardized) input vector into the generator's
/// activation layout. Identity for the sensing link; the communication link
/// maps [Re sub-frame-major; Im] onto channel-major (2P channels x C).
inline VectorXd arrange_generator_input(const CganModel& m, const std::vector<double>& R) {
    const int F = m.gen_spec.input.features();
    if (static_cast<int>(R.size()) != F)
        throw std::invalid_argument("arrange_generator_input: raw input length mismatch");
    VectorXd x(F);
    if (m.link == Link::sensing) {
        for (int i = 0; i < F; ++i) x(i) = R[static_cast<std::size_t>(i)];
        return x;
    }
    const int C = m.gen_spec.input.length;
    const int P = m.gen_spec.input.channels / 2;
    const int n = C * P;
    for (int ch = 0; ch < 2 * P; ++ch)
        for (int c = 0; c < C; ++c) {
            const int src = (ch < P) ? c * P + ch : n + c * P + (ch - P);
            x(ch * C + c) = R[static_cast<std::size_t>(src)];
        }
    return x;
}

/// L_D = -(1/2) sum_j [log d_real_j + log(1 - d_fake_j)], from logits.
inline double discriminator_loss_from_logits(const MatrixXd& z_real, const MatrixXd& z_fake) {
    double loss = 0.0;
    for (Eigen::Index j = 0; j < z_real.cols(); ++j) loss += log_sigmoid(z_real(0, j));
    for (Eigen::Index j = 0; j < z_fake.cols(); ++j) loss += log_sigmoid(-z_fake(0, j));
    return -0.5 * loss;
}

inline double discriminator_loss(const std::vector<double>& d_real, const std::vector<double>& d_fake) {
    double loss = 0.0;
    constexpr double eps = 1e-300;
    for (double d : d_real) loss += std::log(std::max(d, eps));
    for (double d : d_fake) loss += std::log(std::max(1.0 - d, eps));
    return -0.5 * loss;
}

/// Non-saturating adversarial term plus the alpha-weighted L2 term, where L2
/// is the batch mean of the per-sample squared error:
/// L_G = -(1/b) sum_j log d_fake_j + (alpha/b) sum_j |target_j - gen_j|^2.
inline double generator_loss_from_logits(const MatrixXd& z_fake, const MatrixXd& gen_out,
                                         const MatrixXd& target_scaled, double alpha) {
    if (gen_out.rows() != target_scaled.rows() || gen_out.cols() != target_scaled.cols())
        throw std::invalid_argument("generator_loss: shape mismatch");
    const double b = static_cast<double>(gen_out.cols());
    double adv = 0.0;
    for (Eigen::Index j = 0; j < z_fake.cols(); ++j) adv += log_sigmoid(z_fake(0, j));
    const double l2 = (target_scaled - gen_out).squaredNorm() / b;
    return -adv / b + alpha * l2;
}

inline double generator_loss(const std::vector<double>& d_fake, const MatrixXd& gen_out,
                             const MatrixXd& target_scaled, double alpha) {
    if (gen_out.rows() != target_scaled.rows() || gen_out.cols() != target_scaled.cols())
        throw std::invalid_argument("generator_loss: shape mismatch");
    const double b = static_cast<double>(gen_out.cols());
    double adv = 0.0;
    constexpr double eps = 1e-300;
    for (double d : d_fake) adv += std::log(std::max(d, eps));
    return -adv / b + alpha * (target_scaled - gen_out).squaredNorm() / b;
}

namespace detail {

// Drop the trailing sigmoid so training can work on logits.
inline NetworkSpec logit_view(const NetworkSpec& disc_spec) {
    if (disc_spec.layers.empty() || disc_spec.layers.back().kind != LayerSpec::Kind::sigmoid)
        throw std::invalid_argument("discriminator spec must end with sigmoid");
    NetworkSpec s = disc_spec;
    s.layers.pop_back();
    return s;
}

// Pad gradients of the logit view with an empty slot for the sigmoid layer.
inline void pad_to(Gradients& g, std::size_t n) {
    while (g.layers.size() < n) g.layers.emplace_back();
}

inline void add_grads(Gradients& a, const Gradients& b) {
    for (std::size_t i = 0; i < b.layers.size(); ++i) {
        if (b.layers[i].W.size()) a.layers[i].W += b.layers[i].W;
        if (b.layers[i].b.size()) a.layers[i].b += b.layers[i].b;
        if (b.layers[i].scale.size()) a.layers[i].scale += b.layers[i].scale;
        if (b.layers[i].shift.size()) a.layers[i].shift += b.layers[i].shift;
    }
}

} // namespace detail

/// Standardized inputs (arranged for the generator) and rho-scaled targets.
struct PreparedData {
    MatrixXd inputs;  // F x n
    MatrixXd targets; // L x n
};

inline PreparedData prepare_dataset(const CganModel& model, const Dataset& ds) {
    if (ds.pairs.empty()) throw std::invalid_argument("prepare_dataset: empty dataset");
    if (ds.meta.link != model.link) throw std::invalid_argument("prepare_dataset: link mismatch");
    const int F = model.gen_spec.input.features();
    const int L = model.gen_spec.output_shape().features();
    PreparedData d;
    d.inputs.resize(F, static_cast<Eigen::Index>(ds.pairs.size()));
    d.targets.resize(L, static_cast<Eigen::Index>(ds.pairs.size()));
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        const auto& p = ds.pairs[i];
        if (static_cast<int>(p.O.size()) != L)
            throw std::invalid_argument("prepare_dataset: target length mismatch");
        auto [r_std, rec] = standardize(p.R);
        (void)rec;
        d.inputs.col(static_cast<Eigen::Index>(i)) = arrange_generator_input(model, r_std);
        for (int j = 0; j < L; ++j)
            d.targets(j, static_cast<Eigen::Index>(i)) = model.rho * p.O[static_cast<std::size_t>(j)];
    }
    return d;
}

/// Adversarial training: per minibatch one discriminator Adam step (labels 1
/// for scaled targets, 0 for generator outputs) then one generator step with
/// the discriminator frozen. Single-threaded and reproducible given the seed.
inline void train(CganModel& model, const Dataset& train_dataset, const TrainConfig& cfg) {
    cfg.validate();
    const PreparedData data = prepare_dataset(model, train_dataset);
    const auto n = data.inputs.cols();
    const double L = static_cast<double>(data.targets.rows());
    const NetworkSpec disc_logit = detail::logit_view(model.disc_spec);
    AdamState gen_state = AdamState::create(model.gen_spec);
    AdamState disc_state = AdamState::create(model.disc_spec);
    Rng rng = Rng(cfg.seed).derive(0x7a11, model.link == Link::sensing ? 1 : 2);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        EpochStats stats;
        double mse_accum = 0.0;
        std::size_t batches = 0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
            MatrixXd xb(data.inputs.rows(), b), tb(data.targets.rows(), b);
            for (Eigen::Index j = 0; j < b; ++j) {
                xb.col(j) = data.inputs.col(order[static_cast<std::size_t>(start + j)]);
                tb.col(j) = data.targets.col(order[static_cast<std::size_t>(start + j)]);
            }

            // Generator forward.
            ForwardCache gen_cache;
            const MatrixXd gout = forward(model.gen_spec, model.gen_params, xb, Mode::train, &gen_cache);

            // Discriminator step.
            ForwardCache dc_real, dc_fake;
            const MatrixXd z_real = forward(disc_logit, model.disc_params, tb, Mode::train, &dc_real);
            const MatrixXd z_fake = forward(disc_logit, model.disc_params, gout, Mode::train, &dc_fake);
            stats.loss_d += discriminator_loss_from_logits(z_real, z_fake);
            MatrixXd dz_real(1, b), dz_fake(1, b);
            for (Eigen::Index j = 0; j < b; ++j) {
                dz_real(0, j) = -0.5 * (1.0 - sigmoid(z_real(0, j)));
                dz_fake(0, j) = 0.5 * sigmoid(z_fake(0, j));
            }
            BackwardResult br = backward(disc_logit, model.disc_params, dc_real, dz_real);
            BackwardResult bf = backward(disc_logit, model.disc_params, dc_fake, dz_fake);
            detail::add_grads(br.grads, bf.grads);
            detail::pad_to(br.grads, model.disc_spec.layers.size());
            adam_step(model.disc_params, br.grads, disc_state, cfg.lr_discriminator);

            // Generator step through the updated, frozen discriminator.
            ForwardCache dc_g;
            const MatrixXd z_g = forward(disc_logit, model.disc_params, gout, Mode::train, &dc_g);
            stats.loss_g += generator_loss_from_logits(z_g, gout, tb, cfg.alpha);
            MatrixXd dz_g(1, b);
            const double bd = static_cast<double>(b);
            for (Eigen::Index j = 0; j < b; ++j)
                dz_g(0, j) = -(1.0 - sigmoid(z_g(0, j))) / bd;
            BackwardResult through_d = backward(disc_logit, model.disc_params, dc_g, dz_g);
            MatrixXd dgen = through_d.input_gradient + (2.0 * cfg.alpha / bd) * (gout - tb);
            BackwardResult bg = backward(model.gen_spec, model.gen_params, gen_cache, dgen);
            adam_step(model.gen_params, bg.grads, gen_state, cfg.lr_generator);

            mse_accum += (gout - tb).squaredNorm() / (bd * L);
            ++batches;
        }
        if (batches > 0) {
            stats.loss_d /= static_cast<double>(batches);
            stats.loss_g /= static_cast<double>(batches);
            stats.gen_mse = mse_accum / static_cast<double>(batches);
        }
        model.history.push_back(stats);
    }
}

/// Eval-mode forward on frozen parameters (running batchnorm statistics).
inline MatrixXd forward_eval(const NetworkSpec& spec, const Parameters& params, const MatrixXd& input) {
    // Eval mode never writes to params.
    return forward(spec, const_cast<Parameters&>(params), input, Mode::eval);
}

/// Standardize a raw observation, run the generator, undo the rho scaling and
/// reassemble the complex channel matrix (M x M sensing, M x N communication).
inline MatrixXcd estimate(const CganModel& model, const std::vector<double>& raw_R) {
    auto [r_std, rec] = standardize(raw_R);
    (void)rec;
    const VectorXd x = arrange_generator_input(model, r_std);
    const MatrixXd out = forward_eval(model.gen_spec, model.gen_params, x);
    const int rows = model.config.M;
    const int cols = (model.link == Link::sensing) ? model.config.M : model.config.N;
    if (out.rows() != 2 * rows * cols)
        throw std::invalid_argument("estimate: generator output size mismatch");
    MatrixXcd est(rows, cols);
    const int nel = rows * cols;
    const double inv_rho = 1.0 / model.rho;
    for (int i = 0; i < nel; ++i)
        est.data()[i] = cd(out(i, 0) * inv_rho, out(nel + i, 0) * inv_rho);
    return est;
}

// --- checkpoint --------------------------------------------------------------

inline void save_model(const CganModel& m, const std::string& path,
                       const std::string& config_hash = "") {
    Container c;
    c.kind = "checkpoint";
    c.meta["link"] = link_name(m.link);
    c.meta["rho"] = [&] {
        std::ostringstream os;
        os.precision(17);
        os << m.rho;
        return os.str();
    }();
    c.meta["config"] = detail::config_to_meta(m.config);
    c.meta["gen_spec"] = spec_to_string(m.gen_spec);
    c.meta["disc_spec"] = spec_to_string(m.disc_spec);
    if (!config_hash.empty()) c.meta["config_hash"] = config_hash;
    append_params_payload(m.gen_params, c.payload);
    append_params_payload(m.disc_params, c.payload);
    save_container(path, c);
}

inline CganModel load_model(const std::string& path) {
    Container c = load_container(path);
    if (c.kind != "checkpoint") throw std::runtime_error("load_model: not a checkpoint: " + path);
    CganModel m;
    m.link = link_from_name(c.meta.at("link"));
    m.rho = std::stod(c.meta.at("rho"));
    m.config = detail::config_from_meta(c.meta.at("config"));
    m.gen_spec = spec_from_string(c.meta.at("gen_spec"));
    m.disc_spec = spec_from_string(c.meta.at("disc_spec"));
    std::size_t off = read_params_payload(m.gen_spec, c.payload, 0, m.gen_params);
    off = read_params_payload(m.disc_spec, c.payload, off, m.disc_params);
    if (off != c.payload.size())
        throw std::runtime_error("load_model: trailing payload in " + path);
    return m;
}

inline std::string model_config_hash(const std::string& path) {
    Container c = load_container(path);
    auto it = c.meta.find("config_hash");
    return it == c.meta.end() ? std::string() : it->second;
}

} // namespace risce

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "risce/io.hpp"
#include "risce/rng.hpp"

namespace risce {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Activation shape: channels x length. Dense activations have length 1.
/// Storage inside a feature column is channel-major: index = ch * length + pos.
struct Shape {
    int channels = 0;
    int length = 1;
    int features() const { return channels * length; }
    bool operator==(const Shape&) const = default;
};

struct LayerSpec {
    enum class Kind { dense, conv1d, batchnorm, leaky_relu, flatten, sigmoid };
    Kind kind;

    int in = 0, out = 0;                                  // dense
    int in_channels = 0, filters = 0, kernel = 0, stride = 1; // conv1d
    int features = 0;                                     // batchnorm
    double gamma = 0.2;                                   // leaky_relu

    static LayerSpec dense_layer(int in, int out) {
        if (in < 1 || out < 1) throw std::invalid_argument("dense: dimensions must be positive");
        LayerSpec l{Kind::dense};
        l.in = in;
        l.out = out;
        return l;
    }
    static LayerSpec conv1d_layer(int in_channels, int filters, int kernel, int stride) {
        if (in_channels < 1 || filters < 1 || kernel < 1 || stride < 1)
            throw std::invalid_argument("conv1d: dimensions must be positive");
        LayerSpec l{Kind::conv1d};
        l.in_channels = in_channels;
        l.filters = filters;
        l.kernel = kernel;
        l.stride = stride;
        return l;
    }
    static LayerSpec batchnorm_layer(int features) {
        if (features < 1) throw std::invalid_argument("batchnorm: features must be positive");
        LayerSpec l{Kind::batchnorm};
        l.features = features;
        return l;
    }
    static LayerSpec leaky_relu_layer(double gamma) {
        if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("leaky_relu: gamma must be in (0,1)");
        LayerSpec l{Kind::leaky_relu};
        l.gamma = gamma;
        return l;
    }
    static LayerSpec flatten_layer() { return LayerSpec{Kind::flatten}; }
    static LayerSpec sigmoid_layer() { return LayerSpec{Kind::sigmoid}; }
};

/// Output length of a valid (no padding) 1-D convolution.
inline int conv_output_length(int input_length, int kernel, int stride) {
    return (input_length - kernel) / stride + 1;
}

struct NetworkSpec {
    Shape input;
    std::vector<LayerSpec> layers;

    /// Shape after each layer; validates adjacency.
    std::vector<Shape> shapes() const {
        std::vector<Shape> out;
        Shape s = input;
        if (s.channels < 1 || s.length < 1) throw std::invalid_argument("NetworkSpec: bad input shape");
        for (const auto& l : layers) {
            switch (l.kind) {
            case LayerSpec::Kind::dense:
                if (s.length != 1 || s.channels != l.in)
                    throw std::invalid_argument("NetworkSpec: dense input shape mismatch");
                s = {l.out, 1};
                break;
            case LayerSpec::Kind::conv1d: {
                if (s.channels != l.in_channels)
                    throw std::invalid_argument("NetworkSpec: conv1d channel mismatch");
                if (l.kernel > s.length)
                    throw std::invalid_argument("NetworkSpec: conv1d kernel exceeds input length");
                const int out_len = conv_output_length(s.length, l.kernel, l.stride);
                if (out_len < 1) throw std::invalid_argument("NetworkSpec: conv1d empty output");
                s = {l.filters, out_len};
                break;
            }
            case LayerSpec::Kind::batchnorm:
                if (s.channels != l.features)
                    throw std::invalid_argument("NetworkSpec: batchnorm feature mismatch");
                break;
            case LayerSpec::Kind::flatten:
                s = {s.features(), 1};
                break;
            case LayerSpec::Kind::leaky_relu:
            case LayerSpec::Kind::sigmoid:
                break;
            }
            out.push_back(s);
        }
        return out;
    }

    Shape output_shape() const {
        auto sh = shapes();
        return sh.empty() ? input : sh.back();
    }
};

struct LayerParams {
    MatrixXd W; // dense: out x in; conv: filters x (in_channels * kernel)
    VectorXd b;
    VectorXd scale, shift, running_mean, running_var; // batchnorm
};

struct Parameters {
    std::vector<LayerParams> layers;
};
using Gradients = Parameters;

inline constexpr double kBatchnormEps = 1e-5;
inline constexpr double kBatchnormMomentum = 0.1;

/// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases, identity batchnorm.
inline Parameters init_parameters(const NetworkSpec& spec, Rng& rng) {
    spec.shapes(); // validate
    Parameters p;
    p.layers.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        auto& lp = p.layers[i];
        if (l.kind == LayerSpec::Kind::dense) {
            const double bound = std::sqrt(6.0 / (l.in + l.out));
            lp.W.resize(l.out, l.in);
            for (int r = 0; r < l.out; ++r)
                for (int c = 0; c < l.in; ++c)
                    lp.W(r, c) = rng.uniform(-bound, bound);
            lp.b = VectorXd::Zero(l.out);
        } else if (l.kind == LayerSpec::Kind::conv1d) {
            const int fan_in = l.in_channels * l.kernel;
            const int fan_out = l.filters * l.kernel;
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            lp.W.resize(l.filters, fan_in);
            for (int r = 0; r < l.filters; ++r)
                for (int c = 0; c < fan_in; ++c)
                    lp.W(r, c) = rng.uniform(-bound, bound);
            lp.b = VectorXd::Zero(l.filters);
        } else if (l.kind == LayerSpec::Kind::batchnorm) {
            lp.scale = VectorXd::Ones(l.features);
            lp.shift = VectorXd::Zero(l.features);
            lp.running_mean = VectorXd::Zero(l.features);
            lp.running_var = VectorXd::Ones(l.features);
        }
    }
    return p;
}

inline Gradients zero_gradients(const NetworkSpec& spec) {
    Gradients g;
    g.layers.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        auto& lg = g.layers[i];
        if (l.kind == LayerSpec::Kind::dense) {
            lg.W = MatrixXd::Zero(l.out, l.in);
            lg.b = VectorXd::Zero(l.out);
        } else if (l.kind == LayerSpec::Kind::conv1d) {
            lg.W = MatrixXd::Zero(l.filters, l.in_channels * l.kernel);
            lg.b = VectorXd::Zero(l.filters);
        } else if (l.kind == LayerSpec::Kind::batchnorm) {
            lg.scale = VectorXd::Zero(l.features);
            lg.shift = VectorXd::Zero(l.features);
        }
    }
    return g;
}

enum class Mode { train, eval };

struct ForwardCache {
    std::vector<MatrixXd> inputs;   // input activation of each layer
    std::vector<MatrixXd> bn_xhat;  // batchnorm normalized activations
    std::vector<VectorXd> bn_mean;  // per-channel batch means
    std::vector<VectorXd> bn_ivar;  // 1 / sqrt(var + eps)
    MatrixXd output;
    Mode mode = Mode::train;
};

namespace detail {

// Column layout is channel-major, so a (channels x length) activation column
// maps channel ch to rows [ch*length, (ch+1)*length).
inline void bn_stats(const MatrixXd& x, int channels, int length, VectorXd& mean, VectorXd& var) {
    mean = VectorXd::Zero(channels);
    var = VectorXd::Zero(channels);
    const double n = static_cast<double>(length) * static_cast<double>(x.cols());
    for (int ch = 0; ch < channels; ++ch) {
        const auto block = x.middleRows(ch * length, length);
        const double m = block.sum() / n;
        mean(ch) = m;
        var(ch) = (block.array() - m).square().sum() / n;
    }
}

} // namespace detail

/// Run the network on a batch (columns are samples). In train mode batchnorm
/// uses batch statistics and updates the running statistics in `params`.
inline MatrixXd forward(const NetworkSpec& spec, Parameters& params, const MatrixXd& batch_input,
                        Mode mode, ForwardCache* cache = nullptr) {
    const auto shapes = spec.shapes();
    if (batch_input.rows() != spec.input.features() || batch_input.cols() < 1)
        throw std::invalid_argument("forward: input shape mismatch");
    if (cache) {
        cache->inputs.assign(spec.layers.size(), {});
        cache->bn_xhat.assign(spec.layers.size(), {});
        cache->bn_mean.assign(spec.layers.size(), {});
        cache->bn_ivar.assign(spec.layers.size(), {});
        cache->mode = mode;
    }
    MatrixXd x = batch_input;
    Shape s = spec.input;
    const auto batch = x.cols();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        auto& lp = params.layers[i];
        if (cache) cache->inputs[i] = x;
        switch (l.kind) {
        case LayerSpec::Kind::dense:
            x = (lp.W * x).colwise() + lp.b;
            break;
        case LayerSpec::Kind::conv1d: {
            const int out_len = conv_output_length(s.length, l.kernel, l.stride);
            MatrixXd y(l.filters * out_len, batch);
            for (Eigen::Index col = 0; col < batch; ++col) {
                for (int f = 0; f < l.filters; ++f) {
                    for (int o = 0; o < out_len; ++o) {
                        double acc = lp.b(f);
                        for (int ch = 0; ch < l.in_channels; ++ch)
                            for (int z = 0; z < l.kernel; ++z)
                                acc += lp.W(f, ch * l.kernel + z) *
                                       x(ch * s.length + o * l.stride + z, col);
                        y(f * out_len + o, col) = acc;
                    }
                }
            }
            x = std::move(y);
            break;
        }
        case LayerSpec::Kind::batchnorm: {
            VectorXd mean, ivar;
            if (mode == Mode::train) {
                VectorXd var;
                detail::bn_stats(x, s.channels, s.length, mean, var);
                ivar = (var.array() + kBatchnormEps).rsqrt();
                lp.running_mean = (1.0 - kBatchnormMomentum) * lp.running_mean + kBatchnormMomentum * mean;
                lp.running_var = (1.0 - kBatchnormMomentum) * lp.running_var + kBatchnormMomentum * var;
            } else {
                mean = lp.running_mean;
                ivar = (lp.running_var.array() + kBatchnormEps).rsqrt();
            }
            MatrixXd xhat(x.rows(), x.cols());
            for (int ch = 0; ch < s.channels; ++ch)
                xhat.middleRows(ch * s.length, s.length) =
                    (x.middleRows(ch * s.length, s.length).array() - mean(ch)) * ivar(ch);
            if (cache && mode == Mode::train) {
                cache->bn_xhat[i] = xhat;
                cache->bn_mean[i] = mean;
                cache->bn_ivar[i] = ivar;
            }
            for (int ch = 0; ch < s.channels; ++ch)
                x.middleRows(ch * s.length, s.length) =
                    xhat.middleRows(ch * s.length, s.length).array() * lp.scale(ch) + lp.shift(ch);
            break;
        }
        case LayerSpec::Kind::leaky_relu:
            x = x.unaryExpr([g = l.gamma](double v) { return v > 0 ? v : g * v; });
            break;
        case LayerSpec::Kind::flatten:
            break; // storage is already channel-major flat
        case LayerSpec::Kind::sigmoid:
            x = x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
            break;
        }
        s = shapes[i];
    }
    if (cache) cache->output = x;
    return x;
}

struct BackwardResult {
    Gradients grads;
    MatrixXd input_gradient;
};

/// Exact gradients for the scalar loss whose output gradient is `dout`.
/// Requires a cache from a matching train-mode forward call.
inline BackwardResult backward(const NetworkSpec& spec, const Parameters& params,
                               const ForwardCache& cache, const MatrixXd& dout) {
    if (cache.inputs.size() != spec.layers.size())
        throw std::invalid_argument("backward: cache/spec mismatch");
    if (cache.mode != Mode::train)
        throw std::invalid_argument("backward: cache must come from a train-mode forward");
    const auto shapes = spec.shapes();
    BackwardResult res;
    res.grads = zero_gradients(spec);
    MatrixXd dx = dout;
    for (std::size_t ii = spec.layers.size(); ii-- > 0;) {
        const auto& l = spec.layers[ii];
        const auto& lp = params.layers[ii];
        auto& lg = res.grads.layers[ii];
        const MatrixXd& x = cache.inputs[ii];
        const Shape in_shape = (ii == 0) ? spec.input : shapes[ii - 1];
        switch (l.kind) {
        case LayerSpec::Kind::dense:
            lg.W = dx * x.transpose();
            lg.b = dx.rowwise().sum();
            dx = lp.W.transpose() * dx;
            break;
        case LayerSpec::Kind::conv1d: {
            const int out_len = conv_output_length(in_shape.length, l.kernel, l.stride);
            MatrixXd din = MatrixXd::Zero(x.rows(), x.cols());
            for (Eigen::Index col = 0; col < x.cols(); ++col) {
                for (int f = 0; f < l.filters; ++f) {
                    for (int o = 0; o < out_len; ++o) {
                        const double g = dx(f * out_len + o, col);
                        if (g == 0.0) continue;
                        lg.b(f) += g;
                        for (int ch = 0; ch < l.in_channels; ++ch)
                            for (int z = 0; z < l.kernel; ++z) {
                                const int xi = ch * in_shape.length + o * l.stride + z;
                                lg.W(f, ch * l.kernel + z) += g * x(xi, col);
                                din(xi, col) += g * lp.W(f, ch * l.kernel + z);
                            }
                    }
                }
            }
            dx = std::move(din);
            break;
        }
        case LayerSpec::Kind::batchnorm: {
            const MatrixXd& xhat = cache.bn_xhat[ii];
            const VectorXd& ivar = cache.bn_ivar[ii];
            const int L = in_shape.length;
            const double n = static_cast<double>(L) * static_cast<double>(x.cols());
            MatrixXd din(x.rows(), x.cols());
            for (int ch = 0; ch < in_shape.channels; ++ch) {
                const auto dy = dx.middleRows(ch * L, L);
                const auto xh = xhat.middleRows(ch * L, L);
                lg.scale(ch) = (dy.array() * xh.array()).sum();
                lg.shift(ch) = dy.sum();
                const double sum_dxhat = lg.scale(ch); // scale grad equals sum(dy*xhat)
                // dxhat = dy * scale
                din.middleRows(ch * L, L) =
                    (lp.scale(ch) * ivar(ch) / n) *
                    (n * dy.array() - lg.shift(ch) - xh.array() * sum_dxhat).matrix();
            }
            dx = std::move(din);
            break;
        }
        case LayerSpec::Kind::leaky_relu:
            dx = dx.array() * x.unaryExpr([g = l.gamma](double v) { return v > 0 ? 1.0 : g; }).array();
            break;
        case LayerSpec::Kind::flatten:
            break;
        case LayerSpec::Kind::sigmoid: {
            const MatrixXd sig = x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
            dx = dx.array() * sig.array() * (1.0 - sig.array());
            break;
        }
        }
    }
    res.input_gradient = std::move(dx);
    return res;
}

struct AdamState {
    Parameters m, v;
    std::int64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

    static AdamState create(const NetworkSpec& spec) {
        AdamState s;
        s.m = zero_gradients(spec);
        s.v = zero_gradients(spec);
        return s;
    }
};

namespace detail {

template <typename A, typename B, typename C>
inline void adam_update(A& p, const B& g, C& m, C& v, double lr, double b1, double b2,
                        double eps, double bc1, double bc2) {
    if (p.size() == 0) return;
    if (g.rows() != p.rows() || g.cols() != p.cols())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    m = b1 * m + (1.0 - b1) * g;
    v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

} // namespace detail

/// Bias-corrected Adam step; mutates params and state.
inline void adam_step(Parameters& params, const Gradients& grads, AdamState& state, double lr) {
    if (params.layers.size() != grads.layers.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto& p = params.layers[i];
        const auto& g = grads.layers[i];
        auto& m = state.m.layers[i];
        auto& v = state.v.layers[i];
        detail::adam_update(p.W, g.W, m.W, v.W, lr, state.beta1, state.beta2, state.epsilon, bc1, bc2);
        detail::adam_update(p.b, g.b, m.b, v.b, lr, state.beta1, state.beta2, state.epsilon, bc1, bc2);
        detail::adam_update(p.scale, g.scale, m.scale, v.scale, lr, state.beta1, state.beta2, state.epsilon, bc1, bc2);
        detail::adam_update(p.shift, g.shift, m.shift, v.shift, lr, state.beta1, state.beta2, state.epsilon, bc1, bc2);
    }
}

/// Absorb each batchnorm into the directly preceding dense/conv layer using the
/// running statistics. Eval-mode outputs are preserved.
inline std::pair<NetworkSpec, Parameters> fold_batchnorm(const NetworkSpec& spec, const Parameters& params) {
    NetworkSpec out_spec;
    out_spec.input = spec.input;
    Parameters out_params;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        if (l.kind == LayerSpec::Kind::batchnorm) {
            if (out_spec.layers.empty())
                throw std::invalid_argument("fold_batchnorm: batchnorm without preceding layer");
            const auto& prev = out_spec.layers.back();
            if (prev.kind != LayerSpec::Kind::dense && prev.kind != LayerSpec::Kind::conv1d)
                throw std::invalid_argument("fold_batchnorm: batchnorm not preceded by dense/conv");
            const auto& lp = params.layers[i];
            auto& tp = out_params.layers.back();
            const VectorXd s = lp.scale.array() * (lp.running_var.array() + kBatchnormEps).rsqrt();
            tp.W = s.asDiagonal() * tp.W;
            tp.b = (s.array() * (tp.b - lp.running_mean).array() + lp.shift.array()).matrix();
        } else {
            out_spec.layers.push_back(l);
            out_params.layers.push_back(params.layers[i]);
        }
    }
    out_spec.shapes(); // validate
    return {std::move(out_spec), std::move(out_params)};
}

/// Per-sample forward-pass cost of a folded (batchnorm-free) network.
/// Dense in->out: out*(in+1) additions, in*out multiplications. Conv1d:
/// (kernel+1)*out_len*filters additions, kernel*out_len*filters multiplications.
/// Activation costs excluded.
inline std::pair<std::int64_t, std::int64_t> count_operations(const NetworkSpec& spec) {
    const auto shapes = spec.shapes();
    std::int64_t adds = 0, mults = 0;
    Shape s = spec.input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        switch (l.kind) {
        case LayerSpec::Kind::dense:
            adds += static_cast<std::int64_t>(l.out) * (l.in + 1);
            mults += static_cast<std::int64_t>(l.in) * l.out;
            break;
        case LayerSpec::Kind::conv1d: {
            const std::int64_t out_len = conv_output_length(s.length, l.kernel, l.stride);
            adds += static_cast<std::int64_t>(l.kernel + 1) * out_len * l.filters;
            mults += static_cast<std::int64_t>(l.kernel) * out_len * l.filters;
            break;
        }
        case LayerSpec::Kind::batchnorm:
            throw std::invalid_argument("count_operations: fold batchnorm first");
        default:
            break;
        }
        s = shapes[i];
    }
    return {adds, mults};
}

// --- spec/parameter serialization -------------------------------------------

inline std::string spec_to_string(const NetworkSpec& spec) {
    std::ostringstream os;
    os << spec.input.channels << 'x' << spec.input.length;
    for (const auto& l : spec.layers) {
        os << ';';
        switch (l.kind) {
        case LayerSpec::Kind::dense: os << "dense," << l.in << ',' << l.out; break;
        case LayerSpec::Kind::conv1d:
            os << "conv1d," << l.in_channels << ',' << l.filters << ',' << l.kernel << ',' << l.stride;
            break;
        case LayerSpec::Kind::batchnorm: os << "batchnorm," << l.features; break;
        case LayerSpec::Kind::leaky_relu: os << "leaky_relu," << l.gamma; break;
        case LayerSpec::Kind::flatten: os << "flatten"; break;
        case LayerSpec::Kind::sigmoid: os << "sigmoid"; break;
        }
    }
    return os.str();
}

inline NetworkSpec spec_from_string(const std::string& text) {
    NetworkSpec spec;
    std::istringstream is(text);
    std::string tok;
    if (!std::getline(is, tok, ';')) throw std::runtime_error("spec_from_string: empty spec");
    if (std::sscanf(tok.c_str(), "%dx%d", &spec.input.channels, &spec.input.length) != 2)
        throw std::runtime_error("spec_from_string: bad input shape");
    while (std::getline(is, tok, ';')) {
        std::istringstream ls(tok);
        std::string kind;
        std::getline(ls, kind, ',');
        auto next_int = [&ls]() {
            std::string f;
            std::getline(ls, f, ',');
            return std::stoi(f);
        };
        if (kind == "dense") {
            const int in = next_int(), out = next_int();
            spec.layers.push_back(LayerSpec::dense_layer(in, out));
        } else if (kind == "conv1d") {
            const int ic = next_int(), fl = next_int(), kz = next_int(), st = next_int();
            spec.layers.push_back(LayerSpec::conv1d_layer(ic, fl, kz, st));
        } else if (kind == "batchnorm") {
            spec.layers.push_back(LayerSpec::batchnorm_layer(next_int()));
        } else if (kind == "leaky_relu") {
            std::string f;
            std::getline(ls, f, ',');
            spec.layers.push_back(LayerSpec::leaky_relu_layer(std::stod(f)));
        } else if (kind == "flatten") {
            spec.layers.push_back(LayerSpec::flatten_layer());
        } else if (kind == "sigmoid") {
            spec.layers.push_back(LayerSpec::sigmoid_layer());
        } else {
            throw std::runtime_error("spec_from_string: unknown layer kind: " + kind);
        }
    }
    spec.shapes();
    return spec;
}

inline void append_params_payload(const Parameters& params, std::vector<double>& payload) {
    auto push = [&payload](const auto& m) {
        payload.insert(payload.end(), m.data(), m.data() + m.size());
    };
    for (const auto& lp : params.layers) {
        push(lp.W);
        push(lp.b);
        push(lp.scale);
        push(lp.shift);
        push(lp.running_mean);
        push(lp.running_var);
    }
}

inline std::size_t read_params_payload(const NetworkSpec& spec, const std::vector<double>& payload,
                                       std::size_t off, Parameters& params) {
    Rng dummy(0);
    params = init_parameters(spec, dummy);
    auto pull = [&payload, &off](auto& m) {
        if (off + static_cast<std::size_t>(m.size()) > payload.size())
            throw std::runtime_error("checkpoint: truncated parameter payload");
        std::copy(payload.begin() + static_cast<std::ptrdiff_t>(off),
                  payload.begin() + static_cast<std::ptrdiff_t>(off + m.size()), m.data());
        off += static_cast<std::size_t>(m.size());
    };
    for (auto& lp : params.layers) {
        pull(lp.W);
        pull(lp.b);
        pull(lp.scale);
        pull(lp.shift);
        pull(lp.running_mean);
        pull(lp.running_var);
    }
    return off;
}

} // namespace risce

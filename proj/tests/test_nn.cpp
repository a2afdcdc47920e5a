#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "risce/nn.hpp"

using namespace risce;

namespace {

// Scalar loss L = sum(weights .* output), so dL/dout = weights.
double loss_of(const NetworkSpec& spec, Parameters params, const MatrixXd& input,
               const MatrixXd& weights) {
    const MatrixXd y = forward(spec, params, input, Mode::train);
    return (weights.array() * y.array()).sum();
}

struct GradCheckResult {
    double max_rel_err_params = 0.0;
    double max_rel_err_input = 0.0;
};

double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Central finite differences over every trainable scalar and every input entry.
GradCheckResult grad_check(const NetworkSpec& spec, const Parameters& params,
                           const MatrixXd& input, Rng& rng, double h = 1e-6) {
    const Shape out_shape = spec.output_shape();
    MatrixXd weights(out_shape.features(), input.cols());
    for (int i = 0; i < weights.size(); ++i) weights.data()[i] = rng.uniform(-1.0, 1.0);

    Parameters work = params;
    ForwardCache cache;
    forward(spec, work, input, Mode::train, &cache);
    const BackwardResult back = backward(spec, params, cache, weights);

    GradCheckResult res;
    auto probe = [&](MatrixXd& target, const MatrixXd& analytic) {
        for (int i = 0; i < target.size(); ++i) {
            const double saved = target.data()[i];
            target.data()[i] = saved + h;
            const double lp = loss_of(spec, params, input, weights);
            target.data()[i] = saved - h;
            const double lm = loss_of(spec, params, input, weights);
            target.data()[i] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            res.max_rel_err_params =
                std::max(res.max_rel_err_params, rel_err(analytic.data()[i], numeric));
        }
    };
    auto probe_vec = [&](VectorXd& target, const VectorXd& analytic) {
        for (int i = 0; i < target.size(); ++i) {
            const double saved = target(i);
            target(i) = saved + h;
            const double lp = loss_of(spec, params, input, weights);
            target(i) = saved - h;
            const double lm = loss_of(spec, params, input, weights);
            target(i) = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            res.max_rel_err_params = std::max(res.max_rel_err_params, rel_err(analytic(i), numeric));
        }
    };
    Parameters mutable_params = params;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        auto& lp = mutable_params.layers[li];
        const auto& lg = back.grads.layers[li];
        auto swap_probe = [&](auto member_w, auto member_g) {
            auto& tgt = lp.*member_w;
            if (tgt.size() == 0) return;
            // Probe against a params copy that shares the perturbed member.
            for (int i = 0; i < tgt.size(); ++i) {
                const double saved = tgt.data()[i];
                tgt.data()[i] = saved + h;
                const double l_plus = loss_of(spec, mutable_params, input, weights);
                tgt.data()[i] = saved - h;
                const double l_minus = loss_of(spec, mutable_params, input, weights);
                tgt.data()[i] = saved;
                const double numeric = (l_plus - l_minus) / (2.0 * h);
                res.max_rel_err_params = std::max(
                    res.max_rel_err_params, rel_err((lg.*member_g).data()[i], numeric));
            }
        };
        swap_probe(&LayerParams::W, &LayerParams::W);
        swap_probe(&LayerParams::b, &LayerParams::b);
        swap_probe(&LayerParams::scale, &LayerParams::scale);
        swap_probe(&LayerParams::shift, &LayerParams::shift);
    }
    (void)probe;
    (void)probe_vec;

    MatrixXd in = input;
    for (int i = 0; i < in.size(); ++i) {
        const double saved = in.data()[i];
        in.data()[i] = saved + h;
        const double lp = loss_of(spec, params, in, weights);
        in.data()[i] = saved - h;
        const double lm = loss_of(spec, params, in, weights);
        in.data()[i] = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        res.max_rel_err_input =
            std::max(res.max_rel_err_input, rel_err(back.input_gradient.data()[i], numeric));
    }
    return res;
}

MatrixXd random_input(const Shape& s, int batch, Rng& rng) {
    MatrixXd x(s.features(), batch);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.5, 1.5);
    return x;
}

Parameters noisy_init(const NetworkSpec& spec, Rng& rng) {
    Parameters p = init_parameters(spec, rng);
    // Perturb batchnorm affine parameters away from identity so their
    // gradients are exercised at generic points.
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].kind == LayerSpec::Kind::batchnorm) {
            for (int j = 0; j < p.layers[i].scale.size(); ++j) {
                p.layers[i].scale(j) = 1.0 + rng.uniform(-0.3, 0.3);
                p.layers[i].shift(j) = rng.uniform(-0.3, 0.3);
            }
        }
    return p;
}

} // namespace

TEST_CASE("dense and activation gradients match finite differences (< 1e-5)") {
    int instances = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng = Rng(100).derive(static_cast<std::uint64_t>(trial));
        const int in = 2 + static_cast<int>(rng.uniform(0.0, 4.0));
        const int hid = 2 + static_cast<int>(rng.uniform(0.0, 5.0));
        const int out = 1 + static_cast<int>(rng.uniform(0.0, 3.0));
        NetworkSpec spec;
        spec.input = {in, 1};
        spec.layers = {LayerSpec::dense_layer(in, hid), LayerSpec::leaky_relu_layer(0.2),
                       LayerSpec::dense_layer(hid, out)};
        if (trial % 2 == 0) spec.layers.push_back(LayerSpec::sigmoid_layer());
        const Parameters params = noisy_init(spec, rng);
        const MatrixXd input = random_input(spec.input, 3, rng);
        const auto res = grad_check(spec, params, input, rng);
        CHECK(res.max_rel_err_params < 1e-5);
        CHECK(res.max_rel_err_input < 1e-5);
        ++instances;
    }
    CHECK(instances == 20);
}

TEST_CASE("conv1d gradients match finite differences (< 1e-4)") {
    for (int trial = 0; trial < 15; ++trial) {
        Rng rng = Rng(200).derive(static_cast<std::uint64_t>(trial));
        const int ch = 1 + trial % 3;
        const int len = 5 + trial % 4;
        const int filters = 1 + trial % 4;
        const int kernel = 2 + trial % 3;
        const int stride = 1 + trial % 2;
        NetworkSpec spec;
        spec.input = {ch, len};
        spec.layers = {LayerSpec::conv1d_layer(ch, filters, kernel, stride),
                       LayerSpec::leaky_relu_layer(0.2), LayerSpec::flatten_layer()};
        const int flat = spec.output_shape().features();
        spec.layers.push_back(LayerSpec::dense_layer(flat, 2));
        const Parameters params = noisy_init(spec, rng);
        const MatrixXd input = random_input(spec.input, 2, rng);
        const auto res = grad_check(spec, params, input, rng);
        CHECK(res.max_rel_err_params < 1e-4);
        CHECK(res.max_rel_err_input < 1e-4);
    }
}

TEST_CASE("batchnorm gradients match finite differences (< 1e-4)") {
    for (int trial = 0; trial < 15; ++trial) {
        Rng rng = Rng(300).derive(static_cast<std::uint64_t>(trial));
        NetworkSpec spec;
        if (trial % 2 == 0) {
            const int in = 3 + trial % 3, hid = 4 + trial % 3;
            spec.input = {in, 1};
            spec.layers = {LayerSpec::dense_layer(in, hid), LayerSpec::batchnorm_layer(hid),
                           LayerSpec::leaky_relu_layer(0.2), LayerSpec::dense_layer(hid, 2)};
        } else {
            const int ch = 2, len = 6, filters = 3, kernel = 2;
            spec.input = {ch, len};
            spec.layers = {LayerSpec::conv1d_layer(ch, filters, kernel, 1),
                           LayerSpec::batchnorm_layer(filters), LayerSpec::leaky_relu_layer(0.2),
                           LayerSpec::flatten_layer()};
            spec.layers.push_back(LayerSpec::dense_layer(spec.output_shape().features(), 2));
        }
        const Parameters params = noisy_init(spec, rng);
        const MatrixXd input = random_input(spec.input, 4, rng);
        const auto res = grad_check(spec, params, input, rng);
        CHECK(res.max_rel_err_params < 1e-4);
        CHECK(res.max_rel_err_input < 1e-4);
    }
}

TEST_CASE("train-mode batchnorm uses batch statistics and updates running stats") {
    NetworkSpec spec;
    spec.input = {3, 1};
    spec.layers = {LayerSpec::batchnorm_layer(3)};
    Rng rng(7);
    Parameters params = init_parameters(spec, rng);
    MatrixXd x(3, 5);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2.0, 2.0);
    const MatrixXd y = forward(spec, params, x, Mode::train);
    for (int ch = 0; ch < 3; ++ch) {
        // Independent oracle: (x - mean) / sqrt(var + eps) with population var.
        const double mean = x.row(ch).sum() / 5.0;
        const double var = (x.row(ch).array() - mean).square().sum() / 5.0;
        for (int j = 0; j < 5; ++j) {
            const double expected = (x(ch, j) - mean) / std::sqrt(var + kBatchnormEps);
            CHECK(y(ch, j) == doctest::Approx(expected).epsilon(1e-12));
        }
        CHECK(params.layers[0].running_mean(ch) ==
              doctest::Approx(kBatchnormMomentum * mean).epsilon(1e-12));
        CHECK(params.layers[0].running_var(ch) ==
              doctest::Approx(1.0 - kBatchnormMomentum + kBatchnormMomentum * var).epsilon(1e-12));
    }
    // Eval mode normalizes with the running statistics instead.
    const MatrixXd ye = forward(spec, params, x, Mode::eval);
    for (int ch = 0; ch < 3; ++ch)
        for (int j = 0; j < 5; ++j) {
            const double expected = (x(ch, j) - params.layers[0].running_mean(ch)) /
                                    std::sqrt(params.layers[0].running_var(ch) + kBatchnormEps);
            CHECK(ye(ch, j) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("batchnorm folding preserves eval-mode outputs") {
    NetworkSpec spec;
    spec.input = {4, 1};
    spec.layers = {LayerSpec::dense_layer(4, 6), LayerSpec::batchnorm_layer(6),
                   LayerSpec::leaky_relu_layer(0.2), LayerSpec::dense_layer(6, 3),
                   LayerSpec::batchnorm_layer(3)};
    Rng rng(17);
    Parameters params = noisy_init(spec, rng);
    // Move running statistics off their initial values.
    for (int i = 0; i < 5; ++i) forward(spec, params, random_input(spec.input, 8, rng), Mode::train);
    const MatrixXd probe = random_input(spec.input, 6, rng);
    const MatrixXd ref = forward(spec, params, probe, Mode::eval);
    auto [fspec, fparams] = fold_batchnorm(spec, params);
    CHECK(fspec.layers.size() == 3);
    const MatrixXd folded = forward(fspec, fparams, probe, Mode::eval);
    CHECK((ref - folded).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("adam step matches the hand-computed update") {
    NetworkSpec spec;
    spec.input = {1, 1};
    spec.layers = {LayerSpec::dense_layer(1, 1)};
    Parameters p;
    p.layers.resize(1);
    p.layers[0].W = MatrixXd::Constant(1, 1, 0.7);
    p.layers[0].b = VectorXd::Constant(1, -0.2);
    Gradients g = p;
    g.layers[0].W(0, 0) = 0.3;
    g.layers[0].b(0) = -1.1;
    AdamState st = AdamState::create(spec);
    const double lr = 1e-2;
    adam_step(p, g, st, lr);
    // First step: m = (1-b1) g, v = (1-b2) g^2; bias correction makes
    // m_hat = g, v_hat = g^2, so the update is -lr * g / (|g| + eps).
    CHECK(p.layers[0].W(0, 0) ==
          doctest::Approx(0.7 - lr * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
    CHECK(p.layers[0].b(0) ==
          doctest::Approx(-0.2 - lr * (-1.1) / (1.1 + 1e-8)).epsilon(1e-12));
    // Second step with the same gradient, checked against the explicit recursion.
    const double b1 = 0.9, b2 = 0.999;
    const double m2 = (1 - b1) * (b1 + 1) * 0.3 / 1.0; // b1*m1 + (1-b1)g with m1=(1-b1)g
    const double v2 = (1 - b2) * (b2 + 1) * 0.09;
    const double mhat = m2 / (1.0 - b1 * b1), vhat = v2 / (1.0 - b2 * b2);
    const double before = p.layers[0].W(0, 0);
    adam_step(p, g, st, lr);
    CHECK(p.layers[0].W(0, 0) ==
          doctest::Approx(before - lr * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-9));
}

TEST_CASE("initialization: Glorot bounds, zero biases, identity batchnorm") {
    NetworkSpec spec;
    spec.input = {10, 1};
    spec.layers = {LayerSpec::dense_layer(10, 20), LayerSpec::batchnorm_layer(20)};
    Rng rng(5);
    const Parameters p = init_parameters(spec, rng);
    const double bound = std::sqrt(6.0 / 30.0);
    double max_abs = 0.0;
    for (int i = 0; i < p.layers[0].W.size(); ++i)
        max_abs = std::max(max_abs, std::abs(p.layers[0].W.data()[i]));
    CHECK(max_abs <= bound);
    CHECK(max_abs > 0.5 * bound); // the draw actually fills the range
    CHECK(p.layers[0].b.cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.layers[1].scale.array() == 1.0).all());
    CHECK((p.layers[1].shift.array() == 0.0).all());
    CHECK((p.layers[1].running_var.array() == 1.0).all());
}

TEST_CASE("spec serialization round trips") {
    NetworkSpec spec;
    spec.input = {8, 30};
    spec.layers = {LayerSpec::conv1d_layer(8, 132, 4, 1), LayerSpec::batchnorm_layer(132),
                   LayerSpec::leaky_relu_layer(0.2), LayerSpec::flatten_layer()};
    spec.layers.push_back(LayerSpec::dense_layer(spec.output_shape().features(), 500));
    spec.layers.push_back(LayerSpec::sigmoid_layer());
    const std::string text = spec_to_string(spec);
    const NetworkSpec back = spec_from_string(text);
    CHECK(spec_to_string(back) == text);
    CHECK(back.input == spec.input);
    REQUIRE(back.layers.size() == spec.layers.size());
    CHECK(back.output_shape() == spec.output_shape());
}

TEST_CASE("parameter payload round trips bit-exactly") {
    NetworkSpec spec;
    spec.input = {3, 7};
    spec.layers = {LayerSpec::conv1d_layer(3, 4, 2, 1), LayerSpec::batchnorm_layer(4),
                   LayerSpec::flatten_layer()};
    spec.layers.push_back(LayerSpec::dense_layer(spec.output_shape().features(), 5));
    Rng rng(9);
    Parameters p = noisy_init(spec, rng);
    forward(spec, p, MatrixXd::Random(spec.input.features(), 4), Mode::train);
    std::vector<double> payload;
    append_params_payload(p, payload);
    Parameters q;
    const std::size_t off = read_params_payload(spec, payload, 0, q);
    CHECK(off == payload.size());
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        CHECK(p.layers[i].W == q.layers[i].W);
        CHECK(p.layers[i].b == q.layers[i].b);
        CHECK(p.layers[i].scale == q.layers[i].scale);
        CHECK(p.layers[i].running_mean == q.layers[i].running_mean);
        CHECK(p.layers[i].running_var == q.layers[i].running_var);
    }
}

TEST_CASE("operation counter oracle on hand-counted networks") {
    {
        NetworkSpec spec;
        spec.input = {3, 1};
        spec.layers = {LayerSpec::dense_layer(3, 5), LayerSpec::leaky_relu_layer(0.2),
                       LayerSpec::dense_layer(5, 2)};
        const auto [adds, mults] = count_operations(spec);
        // dense: out*(in+1) adds, in*out mults.
        CHECK(adds == 5 * 4 + 2 * 6);
        CHECK(mults == 3 * 5 + 5 * 2);
    }
    {
        NetworkSpec spec;
        spec.input = {2, 10};
        spec.layers = {LayerSpec::conv1d_layer(2, 7, 3, 1), LayerSpec::flatten_layer()};
        const auto [adds, mults] = count_operations(spec);
        // conv: (kernel+1)*out_len*filters adds, kernel*out_len*filters mults.
        CHECK(adds == 4 * 8 * 7);
        CHECK(mults == 3 * 8 * 7);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "risce/cgan.hpp"
#include "risce/complexity.hpp"

using namespace risce;

namespace {

// Per-network operation count from the layer-walking counter after folding
// batchnorm, the independent oracle for the closed forms.
std::pair<std::int64_t, std::int64_t> counted(const NetworkSpec& spec, const Parameters& params) {
    auto [fspec, fparams] = fold_batchnorm(spec, params);
    (void)fparams;
    return count_operations(fspec);
}

} // namespace

TEST_CASE("sensing estimator totals reproduce the published values at M = 4") {
    const ComplexitySplit se = complexity_se(4);
    CHECK(se.total.adds == 53633);
    CHECK(se.total.mults == 53000);
    // Per-network split consistency.
    CHECK(se.generator.adds + se.discriminator.adds == se.total.adds);
    CHECK(se.generator.mults + se.discriminator.mults == se.total.mults);
}

TEST_CASE("sensing closed form equals the layer counter for a range of M") {
    for (int M : {2, 4, 8, 16}) {
        SystemConfig cfg;
        cfg.M = M;
        const CganModel model = build_se_cgan(cfg, 1);
        const ComplexitySplit se = complexity_se(M);
        const auto gen = counted(model.gen_spec, model.gen_params);
        const auto disc = counted(model.disc_spec, model.disc_params);
        CHECK(se.generator.adds == gen.first);
        CHECK(se.generator.mults == gen.second);
        CHECK(se.discriminator.adds == disc.first);
        CHECK(se.discriminator.mults == disc.second);
        CHECK(se.total.adds == gen.first + disc.first);
        CHECK(se.total.mults == gen.second + disc.second);
    }
}

TEST_CASE("combined-form totals equal the per-network sums for many M") {
    for (int M = 1; M <= 40; M += 2) {
        const ComplexitySplit se = complexity_se(M);
        CHECK(se.total.adds == se.generator.adds + se.discriminator.adds);
        CHECK(se.total.mults == se.generator.mults + se.discriminator.mults);
    }
}

TEST_CASE("communication closed form equals the layer counter at several sizes") {
    struct Dims {
        int M, N;
    };
    for (const Dims d : {Dims{4, 30}, Dims{2, 8}, Dims{3, 16}, Dims{4, 12}}) {
        SystemConfig cfg;
        cfg.M = d.M;
        cfg.N = d.N;
        const CganModel model = build_ce_cgan(cfg, 1);
        const ComplexitySplit ce = complexity_ce(cfg.C(), cfg.P(), cfg.M, cfg.N);
        const auto gen = counted(model.gen_spec, model.gen_params);
        const auto disc = counted(model.disc_spec, model.disc_params);
        CHECK(ce.generator.adds == gen.first);
        CHECK(ce.generator.mults == gen.second);
        CHECK(ce.discriminator.adds == disc.first);
        CHECK(ce.discriminator.mults == disc.second);
    }
}

TEST_CASE("conv feature count matches the valid-convolution formula") {
    CHECK(conv_feature_count(30, 4, 1) == 27);
    CHECK(conv_feature_count(240, 4, 1) == 237);
    CHECK(conv_feature_count(10, 4, 2) == 4);
    CHECK_THROWS_AS(conv_feature_count(3, 4, 1), std::invalid_argument);
}

TEST_CASE("FFN benchmark cost is the sum of its dense-layer closed forms") {
    // Hand oracle for in = 32, out = 32, hidden = 256:
    // adds: 256*33 + 256*257 + 32*257; mults: 32*256 + 256*256 + 256*32.
    const OpCounts f = ffn_complexity(32, 32);
    CHECK(f.adds == 256 * 33 + 256 * 257 + 32 * 257);
    CHECK(f.mults == 32 * 256 + 256 * 256 + 256 * 32);
}

TEST_CASE("reduction is the relative saving against the benchmark") {
    const Reduction r = reduction({1000, 2000}, {600, 500});
    CHECK(r.adds == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(r.mults == doctest::Approx(0.75).epsilon(1e-14));
    CHECK_THROWS_AS(reduction({0, 1}, {0, 0}), std::invalid_argument);
}

TEST_CASE("sensing estimator undercuts its FFN benchmark at M = 4") {
    const ComplexitySplit se = complexity_se(4);
    const OpCounts bench = ffn_complexity(2 * 4 * 4, 2 * 4 * 4);
    CHECK(se.total.adds < bench.adds);
    CHECK(se.total.mults < bench.mults);
}

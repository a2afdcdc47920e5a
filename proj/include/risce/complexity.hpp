#pragma once

#include <cstdint>
#include <stdexcept>

namespace risce {

struct OpCounts {
    std::int64_t adds = 0;
    std::int64_t mults = 0;
    bool operator==(const OpCounts&) const = default;
};

struct ComplexitySplit {
    OpCounts generator;
    OpCounts discriminator;
    OpCounts total;
};

/// Closed-form forward-pass cost of the dense sensing estimator pair,
/// with layer widths eta = (2MP, 100, 200, 2M^2) and P = M.
inline ComplexitySplit complexity_se(int M, int eta2 = 100, int eta3 = 200) {
    if (M < 1) throw std::invalid_argument("complexity_se: M must be >= 1");
    const std::int64_t eta1 = 2LL * M * M; // 2MP with P = M
    const std::int64_t e2 = eta2, e3 = eta3;
    const std::int64_t eta4g = 2LL * M * M;
    ComplexitySplit r;
    r.generator.adds = eta1 * e2 + e2 * e3 + e3 * eta4g + e2 + e3 + eta4g;
    r.generator.mults = eta1 * e2 + e2 * e3 + e3 * eta4g;
    r.discriminator.adds = eta1 * e2 + e2 * e3 + e2 + e3 + (e3 + 1);
    r.discriminator.mults = eta1 * e2 + e2 * e3 + e3;
    // Combined forms with k2 = 2(eta3 + 1), k3 = 3 + eta4_G.
    const std::int64_t k2 = 2 * (e3 + 1);
    const std::int64_t k3 = 3 + eta4g;
    r.total.adds = 2 * eta1 * e2 + k2 * e2 + k3 * e3 + eta4g + 1;
    r.total.mults = 2 * (eta1 * e2 + e2 * e3) + e3 * (eta4g + 1);
    return r;
}

/// Output length of a valid convolution, floor((len - F_z)/F_s) + 1.
inline std::int64_t conv_feature_count(std::int64_t len, int F_z, int F_s) {
    if (F_z > len) throw std::invalid_argument("conv_feature_count: kernel exceeds input length");
    if (F_s < 1) throw std::invalid_argument("conv_feature_count: stride must be >= 1");
    return (len - F_z) / F_s + 1;
}

/// Closed-form cost of the convolutional communication estimator pair.
/// The generator convolves over the C sub-frame positions; the discriminator
/// convolves over its own length-2MN input.
inline ComplexitySplit complexity_ce(int C, int P, int M, int N, int F_z = 4, int F_n = 132,
                                     int F_s = 1, int eta3 = 500) {
    (void)P;
    if (C < 1 || M < 1 || N < 1) throw std::invalid_argument("complexity_ce: bad dimensions");
    const std::int64_t eta_f_g = conv_feature_count(C, F_z, F_s);
    const std::int64_t eta_f_d = conv_feature_count(2LL * M * N, F_z, F_s);
    const std::int64_t e3 = eta3, fz = F_z, fn = F_n;
    const std::int64_t eta4g = 2LL * M * N;
    ComplexitySplit r;
    r.generator.adds = (fz + e3 + 1) * eta_f_g * fn + (eta4g + 1) * e3 + eta4g;
    r.generator.mults = (fz + e3) * eta_f_g * fn + e3 * eta4g;
    r.discriminator.adds = (fz + e3 + 1) * eta_f_d * fn + 2 * e3 + 1;
    r.discriminator.mults = (fz + e3) * eta_f_d * fn + e3;
    r.total.adds = r.generator.adds + r.discriminator.adds;
    r.total.mults = r.generator.mults + r.discriminator.mults;
    return r;
}

/// Dense closed forms applied to the comparison FFN (in -> 256 -> 256 -> out).
inline OpCounts ffn_complexity(int in, int out, int hidden = 256) {
    if (in < 1 || out < 1 || hidden < 1) throw std::invalid_argument("ffn_complexity: bad dimensions");
    OpCounts r;
    const std::int64_t dims[4] = {in, hidden, hidden, out};
    for (int i = 0; i < 3; ++i) {
        r.adds += dims[i + 1] * (dims[i] + 1);
        r.mults += dims[i] * dims[i + 1];
    }
    return r;
}

/// (benchmark - proposed) / benchmark, per count type.
struct Reduction {
    double adds = 0.0;
    double mults = 0.0;
};

inline Reduction reduction(const OpCounts& benchmark, const OpCounts& proposed) {
    if (benchmark.adds <= 0 || benchmark.mults <= 0)
        throw std::invalid_argument("reduction: benchmark counts must be > 0");
    return {static_cast<double>(benchmark.adds - proposed.adds) / static_cast<double>(benchmark.adds),
            static_cast<double>(benchmark.mults - proposed.mults) / static_cast<double>(benchmark.mults)};
}

} // namespace risce

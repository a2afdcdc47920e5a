#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace risce {

namespace detail {

// splitmix64; used to mix (seed, salt...) into substream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Seeded random stream. Substreams derived through `derive` are
/// statistically independent and reproducible across runs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(detail::mix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    Rng derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        std::uint64_t s = detail::mix64(seed_ ^ detail::mix64(a));
        s = detail::mix64(s ^ detail::mix64(b));
        s = detail::mix64(s ^ detail::mix64(c));
        return Rng(s);
    }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }

    /// Circularly symmetric complex normal CN(0, 1): E|x|^2 = 1.
    std::complex<double> cnormal() {
        static constexpr double half = 0.7071067811865476; // 1/sqrt(2)
        return {normal() * half, normal() * half};
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Fisher-Yates index shuffle.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(gen_() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace risce

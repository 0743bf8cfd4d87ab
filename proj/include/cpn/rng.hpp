#pragma once

// Counter-based random streams (Philox4x32-10) addressed by
// (experiment seed, chain id, draw index), plus the few distributions the
// samplers need.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace cpn {

/// Philox4x32 with 10 rounds.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

/// A reproducible random stream. Copying a stream copies its position.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed = 0, std::uint64_t chain = 0, std::uint64_t index = 0)
        : seed_(seed), chain_(chain), index_(index) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t chain() const { return chain_; }
    /// Number of 64-bit words drawn so far.
    [[nodiscard]] std::uint64_t position() const { return 2 * index_ - (have_ ? 1 : 0); }

    result_type operator()() {
        if (have_) {
            have_ = false;
            return spare_;
        }
        const std::array<std::uint32_t, 4> c{static_cast<std::uint32_t>(index_),
                                             static_cast<std::uint32_t>(index_ >> 32),
                                             static_cast<std::uint32_t>(chain_),
                                             static_cast<std::uint32_t>(chain_ >> 32)};
        const std::array<std::uint32_t, 2> k{static_cast<std::uint32_t>(seed_),
                                             static_cast<std::uint32_t>(seed_ >> 32)};
        const auto out = philox4x32(c, k);
        ++index_;
        spare_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        have_ = true;
        return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1).
    double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t v;
        do {
            v = (*this)();
        } while (v >= limit);
        return v % n;
    }

    double normal() {
        const double u1 = uniform_open(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    }

    /// Poisson variate: sequential inversion below mean 30, transformed
    /// rejection (PTRS) above.
    std::uint64_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        if (mean < 30.0) {
            double p = std::exp(-mean);
            double u = uniform();
            std::uint64_t k = 0;
            while (u > p) {
                u -= p;
                ++k;
                p *= mean / static_cast<double>(k);
                if (p <= 0.0) break;
            }
            return k;
        }
        const double smu = std::sqrt(mean);
        const double b = 0.931 + 2.53 * smu;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mean = std::log(mean);
        for (;;) {
            const double U = uniform() - 0.5;
            const double V = uniform_open();
            const double us = 0.5 - std::abs(U);
            const double k = std::floor((2.0 * a / us + b) * U + mean + 0.43);
            if (us >= 0.07 && V <= vr) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && V > us)) continue;
            if (std::log(V) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                -mean + k * log_mean - std::lgamma(k + 1.0))
                return static_cast<std::uint64_t>(k);
        }
    }

    /// Index drawn from nonnegative weights given as a cumulative table.
    std::size_t discrete(const std::vector<double>& cumulative) {
        const double u = uniform() * cumulative.back();
        std::size_t lo = 0, hi = cumulative.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cumulative[mid] > u)
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

private:
    std::uint64_t seed_;
    std::uint64_t chain_;
    std::uint64_t index_;
    std::uint64_t spare_ = 0;
    bool have_ = false;
};

}  // namespace cpn

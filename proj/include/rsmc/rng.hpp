#ifndef RSMC_RNG_HPP
#define RSMC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>

namespace rsmc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with deterministic stream derivation. Streams are identified
// by a seed plus up to three stream words, so independent components
// (particles, chains, resampling) never share a sequence.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                 std::uint64_t c = 0) {
        std::uint64_t st = seed;
        st ^= splitmix64(st) + a;
        st ^= (splitmix64(st) ^ b) * 0xff51afd7ed558ccdULL;
        st ^= splitmix64(st) + c;
        s_[0] = splitmix64(st);
        s_[1] = splitmix64(st);
        s_[2] = splitmix64(st);
        s_[3] = splitmix64(st);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~std::uint64_t(0); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform on [0, 1)
    double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method, no cached second value (keeps streams
    // insensitive to call interleaving)
    double normal() {
        for (;;) {
            double u = 2.0 * uniform() - 1.0;
            double v = 2.0 * uniform() - 1.0;
            double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                return u * std::sqrt(-2.0 * std::log(s) / s);
            }
        }
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential() {
        double u;
        do { u = uniform(); } while (u <= 0.0);
        return -std::log(u);
    }

    // Poisson: inversion for small means, Hormann's PTRS transformed
    // rejection otherwise
    long poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 10.0) {
            double l = std::exp(-mean);
            long k = 0;
            double p = uniform();
            while (p > l) {
                p *= uniform();
                ++k;
            }
            return k;
        }
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mean = std::log(mean);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform();
            double us = 0.5 - std::fabs(u);
            double kd = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr) return long(kd);
            if (kd < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                kd * log_mean - mean - std::lgamma(kd + 1.0)) {
                return long(kd);
            }
        }
    }

    // Marsaglia-Tsang for shape >= 1, boosted for shape < 1
    double gamma(double shape, double scale) {
        if (shape < 1.0) {
            double u;
            do { u = uniform(); } while (u <= 0.0);
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
                return d * v * scale;
            }
        }
    }

    // NegBin with mean mu and variance mu + phi*mu^2, via gamma-Poisson
    // mixture; collapses to Poisson as phi -> 0
    long neg_binomial(double mu, double phi) {
        if (mu <= 0.0) return 0;
        if (phi < 1e-6) return poisson(mu);
        double lambda = gamma(1.0 / phi, phi * mu);
        return poisson(lambda);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

} // namespace rsmc

#endif

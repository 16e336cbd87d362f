#ifndef RSMC_DIST_HPP
#define RSMC_DIST_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace rsmc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(x[i])), stable; returns -inf when all entries are -inf
inline double log_sum_exp(std::span<const double> x) {
    double m = kNegInf;
    for (double v : x) m = std::max(m, v);
    if (m == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - m);
    return m + std::log(sum);
}

// log P(Y = y) for Y ~ Poisson(mu). mu = 0 is a point mass at 0.
inline double poisson_logpmf(long y, double mu) {
    if (y < 0) return kNegInf;
    if (mu <= 0.0) return y == 0 ? 0.0 : kNegInf;
    return double(y) * std::log(mu) - mu - std::lgamma(double(y) + 1.0);
}

// log P(Y = y) for Y with mean mu and variance mu + phi*mu^2, parameterized
// as NegBin(r = 1/phi, p = 1/(1 + phi*mu)). Falls back to the Poisson limit
// for phi below 1e-6, where the NegBin form loses precision.
inline double neg_binomial_logpmf(long y, double mu, double phi) {
    if (y < 0) return kNegInf;
    if (mu <= 0.0) return y == 0 ? 0.0 : kNegInf;
    if (phi < 1e-6) return poisson_logpmf(y, mu);
    const double r = 1.0 / phi;
    const double log_p = -std::log1p(phi * mu);        // log p
    const double log_1mp = std::log(phi * mu) + log_p; // log(1-p)
    return std::lgamma(double(y) + r) - std::lgamma(r) -
           std::lgamma(double(y) + 1.0) + r * log_p + double(y) * log_1mp;
}

inline double normal_logpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.9189385332046727; // log sqrt(2 pi)
}

} // namespace rsmc

#endif

#ifndef RSMC_EVAL_HPP
#define RSMC_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsmc {

// empirical quantile with linear interpolation (R type-7) on a sorted copy
inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(v.begin(), v.end());
    if (p <= 0.0) return v.front();
    if (p >= 1.0) return v.back();
    const double h = p * double(v.size() - 1);
    const size_t lo = size_t(h);
    const double frac = h - double(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

// sqrt((1/T) sum (y_t - yhat_t)^2) over evaluable days
inline double rmse(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size()) {
        throw std::invalid_argument("rmse: length mismatch");
    }
    if (predicted.empty()) throw std::invalid_argument("rmse: no evaluable days");
    double s = 0.0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        const double e = observed[i] - predicted[i];
        s += e * e;
    }
    return std::sqrt(s / double(predicted.size()));
}

// proportion of observations inside [lo_t, hi_t], endpoints inclusive
inline double coverage(std::span<const std::pair<double, double>> intervals,
                       std::span<const double> observed) {
    if (intervals.size() != observed.size()) {
        throw std::invalid_argument("coverage: length mismatch");
    }
    if (intervals.empty()) throw std::invalid_argument("coverage: no evaluable days");
    size_t hit = 0;
    for (size_t i = 0; i < intervals.size(); ++i) {
        if (intervals[i].first > intervals[i].second) {
            throw std::invalid_argument("coverage: interval with lo > hi");
        }
        if (observed[i] >= intervals[i].first && observed[i] <= intervals[i].second) {
            ++hit;
        }
    }
    return double(hit) / double(intervals.size());
}

// single-day CRPS via the sorted-sample estimator:
//   (1/N) sum |Y_j - y|  -  (1/N^2) sum_j (2j - N - 1) Ytilde_j
// with Ytilde ascending and j = 1..N
inline double crps_day(std::span<const double> samples, double y) {
    const size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("crps: need >= 2 samples per day");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    double abs_term = 0.0;
    double gini = 0.0;
    for (size_t j = 0; j < n; ++j) {
        abs_term += std::fabs(s[j] - y);
        gini += (2.0 * double(j + 1) - double(n) - 1.0) * s[j];
    }
    return abs_term / double(n) - gini / (double(n) * double(n));
}

// average CRPS over days; samples_per_day[t] holds the predictive draws
inline double crps(const std::vector<std::vector<double>>& samples_per_day,
                   std::span<const double> observed) {
    if (samples_per_day.size() != observed.size()) {
        throw std::invalid_argument("crps: length mismatch");
    }
    if (samples_per_day.empty()) throw std::invalid_argument("crps: no evaluable days");
    double s = 0.0;
    for (size_t t = 0; t < samples_per_day.size(); ++t) {
        s += crps_day(samples_per_day[t], observed[t]);
    }
    return s / double(samples_per_day.size());
}

struct ScoreReport {
    double rmse = 0.0;
    std::map<double, double> coverage; // level (1 - alpha) -> empirical coverage
    double crps = 0.0;
    int n_obs = 0;
    std::string scope = "within-sample";
};

// Scores a predictive ensemble against observations. Days with no
// observation (or no finite predictive draws) are excluded from all metrics.
// Predictive means and intervals come from the pooled equally weighted
// samples; intervals are the empirical alpha/2 and 1-alpha/2 quantiles.
inline ScoreReport score_predictive(
    const std::vector<std::vector<double>>& samples_per_day,
    const std::vector<std::optional<double>>& observed,
    const std::vector<double>& levels = {0.5, 0.95}) {
    std::vector<std::vector<double>> samples;
    std::vector<double> obs;
    for (size_t t = 0; t < observed.size(); ++t) {
        if (!observed[t]) continue;
        std::vector<double> finite;
        for (double v : samples_per_day[t]) {
            if (std::isfinite(v)) finite.push_back(v);
        }
        if (finite.size() < 2) continue;
        samples.push_back(std::move(finite));
        obs.push_back(*observed[t]);
    }
    if (samples.empty()) throw std::invalid_argument("score_predictive: no evaluable days");

    ScoreReport rep;
    rep.n_obs = int(obs.size());
    std::vector<double> means(samples.size());
    for (size_t t = 0; t < samples.size(); ++t) {
        double m = 0.0;
        for (double v : samples[t]) m += v;
        means[t] = m / double(samples[t].size());
    }
    rep.rmse = rmse(means, obs);
    rep.crps = crps(samples, obs);
    for (double level : levels) {
        const double a = (1.0 - level) / 2.0;
        std::vector<std::pair<double, double>> iv(samples.size());
        for (size_t t = 0; t < samples.size(); ++t) {
            iv[t] = {quantile(samples[t], a), quantile(samples[t], 1.0 - a)};
        }
        rep.coverage[level] = coverage(iv, obs);
    }
    return rep;
}

} // namespace rsmc

#endif

#ifndef RSMC_CORE_HPP
#define RSMC_CORE_HPP

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rsmc {

// ---------------------------------------------------------------------------
// Calendar dates
// ---------------------------------------------------------------------------

using Date = std::chrono::sys_days;

inline Date make_date(int y, unsigned m, unsigned d) {
    return std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} /
                                 std::chrono::day{d}};
}

inline Date parse_date(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3) {
        throw std::invalid_argument("invalid date: '" + s + "' (expected YYYY-MM-DD)");
    }
    auto ymd = std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d};
    if (!ymd.ok()) {
        throw std::invalid_argument("invalid date: '" + s + "'");
    }
    return std::chrono::sys_days{ymd};
}

inline std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

// ISO weekday: Monday = 1 ... Sunday = 7
inline int iso_weekday(Date d) {
    return int(std::chrono::weekday{d}.iso_encoding());
}

// ---------------------------------------------------------------------------
// Observed data
// ---------------------------------------------------------------------------

// Dated daily case counts. local_cases may contain missing days; imports
// default to zero. Days are indexed t = 1..T throughout.
struct TimeSeriesData {
    Date start_date{};
    std::vector<std::optional<long>> local_cases;
    std::vector<long> imported_cases;

    int length() const { return int(local_cases.size()); }

    Date date(int t) const { return start_date + std::chrono::days{t - 1}; }

    bool missing(int t) const { return !local_cases[size_t(t - 1)].has_value(); }

    double local_or_zero(int t) const {
        const auto& v = local_cases[size_t(t - 1)];
        return v ? double(*v) : 0.0;
    }

    long imported(int t) const { return imported_cases[size_t(t - 1)]; }

    // local (missing treated as 0) + imported
    double total(int t) const { return local_or_zero(t) + double(imported(t)); }

    void validate() const {
        if (local_cases.empty()) {
            throw std::invalid_argument("time series must have length >= 1");
        }
        if (imported_cases.size() != local_cases.size()) {
            throw std::invalid_argument("local and imported series lengths differ");
        }
        for (size_t i = 0; i < local_cases.size(); ++i) {
            if (local_cases[i] && *local_cases[i] < 0) {
                throw std::invalid_argument("negative local case count at day " +
                                            std::to_string(i + 1));
            }
            if (imported_cases[i] < 0) {
                throw std::invalid_argument("negative imported case count at day " +
                                            std::to_string(i + 1));
            }
        }
    }

    static TimeSeriesData from_counts(Date start, std::vector<long> local,
                                      std::vector<long> imported = {}) {
        TimeSeriesData d;
        d.start_date = start;
        d.local_cases.reserve(local.size());
        for (long v : local) d.local_cases.emplace_back(v);
        d.imported_cases = imported.empty() ? std::vector<long>(local.size(), 0)
                                            : std::move(imported);
        d.validate();
        return d;
    }
};

// ---------------------------------------------------------------------------
// Discretized delay distributions
// ---------------------------------------------------------------------------

// PMF over integer lags 1..u_max. No mass at lag 0: no same-day transmission.
struct DiscretePMF {
    std::vector<double> probs; // probs[u-1] is the mass at lag u

    int u_max() const { return int(probs.size()); }

    double at(int lag) const {
        return (lag >= 1 && lag <= u_max()) ? probs[size_t(lag - 1)] : 0.0;
    }

    double mean() const {
        double m = 0.0;
        for (int u = 1; u <= u_max(); ++u) m += u * probs[size_t(u - 1)];
        return m;
    }

    void validate() const {
        if (probs.empty()) throw std::invalid_argument("empty PMF");
        double sum = 0.0;
        for (double p : probs) {
            if (p < 0.0) throw std::invalid_argument("negative PMF entry");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("PMF does not sum to 1");
        }
    }
};

// Discretize a Gamma(mean, sd) by evaluating the density at integer lags
// 1..u_max and normalizing. Shape/scale by moment matching.
inline DiscretePMF discretize_gamma(double mean, double sd, int u_max) {
    if (!(mean > 0.0) || !(sd > 0.0)) {
        throw std::invalid_argument("discretize_gamma: mean and sd must be positive");
    }
    if (u_max < 1) throw std::invalid_argument("discretize_gamma: u_max must be >= 1");
    const double shape = (mean / sd) * (mean / sd);
    const double scale = sd * sd / mean;
    DiscretePMF pmf;
    pmf.probs.resize(size_t(u_max));
    double sum = 0.0;
    for (int u = 1; u <= u_max; ++u) {
        double logpdf = (shape - 1.0) * std::log(double(u)) - double(u) / scale -
                        std::lgamma(shape) - shape * std::log(scale);
        pmf.probs[size_t(u - 1)] = std::exp(logpdf);
        sum += pmf.probs[size_t(u - 1)];
    }
    for (double& p : pmf.probs) p /= sum;
    return pmf;
}

inline constexpr int kMaxAutoLag = 35;

// Auto-select u_max: smallest lag with cumulative discretized mass >= 0.999,
// capped at kMaxAutoLag days.
inline DiscretePMF discretize_gamma(double mean, double sd) {
    DiscretePMF full = discretize_gamma(mean, sd, kMaxAutoLag);
    double cum = 0.0;
    int u_max = kMaxAutoLag;
    for (int u = 1; u <= kMaxAutoLag; ++u) {
        cum += full.probs[size_t(u - 1)];
        if (cum >= 0.999) {
            u_max = u;
            break;
        }
    }
    DiscretePMF pmf;
    pmf.probs.assign(full.probs.begin(), full.probs.begin() + u_max);
    double sum = 0.0;
    for (double p : pmf.probs) sum += p;
    for (double& p : pmf.probs) p /= sum;
    return pmf;
}

// ---------------------------------------------------------------------------
// Renewal arithmetic
// ---------------------------------------------------------------------------

// Force of infection: sum_u history[end-u] * pmf(u), zero-padded before the
// start of history. history is ordered oldest..newest.
inline double force_of_infection(std::span<const double> history,
                                 const DiscretePMF& pmf) {
    const int n = int(history.size());
    double lambda = 0.0;
    for (int u = 1; u <= pmf.u_max(); ++u) {
        const int idx = n - u;
        if (idx < 0) break;
        if (history[size_t(idx)] < 0.0) {
            throw std::invalid_argument("negative history entry in renewal sum");
        }
        lambda += history[size_t(idx)] * pmf.probs[size_t(u - 1)];
    }
    return lambda;
}

// E[C_t] = R * sum_u history[t-u] * omega_u
inline double renewal_mean(double R, std::span<const double> history,
                           const DiscretePMF& pmf) {
    if (R < 0.0) throw std::invalid_argument("renewal_mean: R must be >= 0");
    return R * force_of_infection(history, pmf);
}

// mu_t = sum_u incidence[t-u] * d_u, with incidence[i] = I_{i+1} (1-based
// days) and zero-padding before day 1
inline double delay_convolution(std::span<const double> incidence,
                                const DiscretePMF& delay, int t) {
    if (t < 1) throw std::invalid_argument("delay_convolution: t must be >= 1");
    double mu = 0.0;
    for (int u = 1; u <= delay.u_max(); ++u) {
        const int day = t - u;
        if (day < 1) break;
        const double inc = incidence[size_t(day - 1)];
        if (inc < 0.0) throw std::invalid_argument("negative incidence entry");
        mu += inc * delay.probs[size_t(u - 1)];
    }
    return mu;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct ParamVector {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<std::pair<double, double>> bounds; // (lower, upper) support

    int dim() const { return int(values.size()); }

    double operator[](int i) const { return values[size_t(i)]; }

    bool in_bounds() const {
        for (size_t i = 0; i < values.size(); ++i) {
            if (values[i] < bounds[i].first || values[i] > bounds[i].second) {
                return false;
            }
        }
        return true;
    }

    double get(const std::string& name) const {
        for (size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return values[i];
        }
        throw std::invalid_argument("unknown parameter: " + name);
    }

    ParamVector with_values(std::vector<double> v) const {
        ParamVector out = *this;
        out.values = std::move(v);
        return out;
    }
};

} // namespace rsmc

#endif

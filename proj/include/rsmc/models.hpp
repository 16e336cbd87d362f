#ifndef RSMC_MODELS_HPP
#define RSMC_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rsmc/dist.hpp"
#include "rsmc/model.hpp"

namespace rsmc {

namespace detail {

// incidence cap; a runaway proposal can otherwise push the Poisson mean
// past double range
inline constexpr double kIncidenceCap = 1e12;

inline double lognormal_rw_step(double prev_r, double sigma, Rng& rng) {
    if (sigma <= 0.0) return prev_r;
    return std::exp(std::log(prev_r) + sigma * rng.normal());
}

// force of infection over observed total cases (local + imported) up to t-1
inline double data_force(const TimeSeriesData& data, int t, const DiscretePMF& pmf) {
    double lambda = 0.0;
    const int T = data.length();
    for (int u = 1; u <= pmf.u_max(); ++u) {
        const int day = t - u;
        if (day < 1) break;
        if (day > T) continue;
        lambda += data.total(day) * pmf.probs[size_t(u - 1)];
    }
    return lambda;
}

// force of infection over hidden incidence (component `comp`) plus imported
// cases from the data
inline double state_force(const StateHistory& h, const TimeSeriesData& data,
                          const DiscretePMF& pmf, int comp, bool use_imports) {
    double lambda = 0.0;
    const int t = h.t();
    const int T = data.length();
    for (int u = 1; u <= pmf.u_max(); ++u) {
        double inc = h.at_lag(u, comp);
        if (use_imports) {
            const int day = t - u;
            if (day >= 1 && day <= T) inc += double(data.imported(day));
        }
        lambda += inc * pmf.probs[size_t(u - 1)];
    }
    return lambda;
}

// expected reported cases: incidence history convolved with the delay PMF,
// excluding the current day (no same-day reporting)
inline double delayed_mean(const StateHistory& h, const DiscretePMF& delay,
                           int comp, int back = 0) {
    double mu = 0.0;
    for (int u = 1; u <= delay.u_max(); ++u) {
        mu += h.at_lag(u + back, comp) * delay.probs[size_t(u - 1)];
    }
    return mu;
}

inline ParamPrior uniform_box_prior(std::vector<std::pair<double, double>> box) {
    ParamPrior prior;
    prior.logpdf = [box](std::span<const double> v) {
        for (size_t i = 0; i < box.size(); ++i) {
            if (v[i] <= box[i].first || v[i] >= box[i].second) return kNegInf;
        }
        return 0.0;
    };
    prior.sample = [box](std::span<double> out, Rng& rng) {
        for (size_t i = 0; i < box.size(); ++i) {
            out[i] = rng.uniform(box[i].first, box[i].second);
        }
    };
    return prior;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Model 1: log-normal random walk on R_t, Poisson renewal observation over
// reported cases. Hidden state: (R). theta = (sigma).
// ---------------------------------------------------------------------------

struct Model1Options {
    DiscretePMF serial_interval = discretize_gamma(6.5, 4.2);
    double init_r_min = 0.1;
    double init_r_max = 10.0;
    // when nonempty, the observation sampler returns seed_obs[t-1] for
    // t <= seed_obs.size(); used to start a simulated epidemic
    std::vector<double> seed_obs;
};

inline ModelSpec model1_spec(const Model1Options& opt = {}) {
    opt.serial_interval.validate();
    ModelSpec m;
    m.state_dim = 1;
    m.required_lag = opt.serial_interval.u_max();

    const DiscretePMF pmf = opt.serial_interval;
    const double log_rmin = std::log(opt.init_r_min);
    const double log_rmax = std::log(opt.init_r_max);
    const std::vector<double> seed = opt.seed_obs;

    m.initial = [log_rmin, log_rmax](std::span<double> out, const ParamVector&,
                                     Rng& rng) {
        out[0] = std::exp(rng.uniform(log_rmin, log_rmax));
    };
    m.transition = [](std::span<double> out, const StateHistory& h,
                      const TimeSeriesData&, const ParamVector& theta, Rng& rng) {
        out[0] = detail::lognormal_rw_step(h.at_lag(1, 0), theta[0], rng);
    };
    // a day with no case history carries no renewal information: the Poisson
    // mean is identically 0 for every particle, so treat it as unobserved.
    // Days inside the seeding window are pinned constants, not renewal
    // draws, so they are skipped too.
    const int seed_len = int(seed.size());
    m.observed = [pmf, seed_len](int t, const TimeSeriesData& data) {
        return t > seed_len && !data.missing(t) &&
               detail::data_force(data, t, pmf) > 0.0;
    };
    m.obs_logdensity = [pmf](const StateHistory& h, const TimeSeriesData& data,
                             const ParamVector&) {
        const int t = h.t();
        const double mean = h.at_lag(0, 0) * detail::data_force(data, t, pmf);
        return poisson_logpmf(*data.local_cases[size_t(t - 1)], mean);
    };
    m.obs_sampler = [pmf, seed](const StateHistory& h, const TimeSeriesData& data,
                                const ParamVector&, Rng& rng) {
        const int t = h.t();
        if (size_t(t) <= seed.size()) return seed[size_t(t - 1)];
        const double mean = h.at_lag(0, 0) * detail::data_force(data, t, pmf);
        return double(rng.poisson(mean));
    };
    m.prior = detail::uniform_box_prior({{0.0, 1.0}});
    m.param_template = ParamVector{{"sigma"}, {0.2}, {{0.0, 1.0}}};
    return m;
}

// ---------------------------------------------------------------------------
// Model 2: hidden infection incidence driven by the renewal equation with
// imported cases; negative binomial reporting noise. Hidden state: (R, I).
// theta = (sigma, phi).
// ---------------------------------------------------------------------------

struct Model2Options {
    DiscretePMF generation_time = discretize_gamma(6.5, 4.2);
    double init_r_min = 0.1;
    double init_r_max = 10.0;
    // incidence is pinned to seed_incidence[t-1] for t <= seed_incidence.size();
    // when fitting, pass the observed local cases for the first u_max days
    std::vector<double> seed_incidence;
};

// seed series from observed local cases (missing -> 0) over the first u_max days
inline std::vector<double> seed_from_data(const TimeSeriesData& data, int u_max) {
    std::vector<double> seed;
    const int n = std::min(u_max, data.length());
    seed.reserve(size_t(n));
    for (int t = 1; t <= n; ++t) seed.push_back(data.local_or_zero(t));
    return seed;
}

inline ModelSpec model2_spec(const Model2Options& opt) {
    opt.generation_time.validate();
    ModelSpec m;
    m.state_dim = 2;
    m.required_lag = opt.generation_time.u_max();

    const DiscretePMF pmf = opt.generation_time;
    const double log_rmin = std::log(opt.init_r_min);
    const double log_rmax = std::log(opt.init_r_max);
    const std::vector<double> seed = opt.seed_incidence;

    m.initial = [log_rmin, log_rmax](std::span<double> out, const ParamVector&,
                                     Rng& rng) {
        out[0] = std::exp(rng.uniform(log_rmin, log_rmax));
        out[1] = 0.0;
    };
    m.transition = [pmf, seed](std::span<double> out, const StateHistory& h,
                               const TimeSeriesData& data, const ParamVector& theta,
                               Rng& rng) {
        const int t = h.t();
        out[0] = detail::lognormal_rw_step(h.at_lag(1, 0), theta[0], rng);
        if (size_t(t) <= seed.size()) {
            out[1] = seed[size_t(t - 1)];
        } else {
            double lam = out[0] * detail::state_force(h, data, pmf, 1, true);
            lam = std::min(lam, detail::kIncidenceCap);
            out[1] = double(rng.poisson(lam));
        }
    };
    // seeded days have incidence pinned to a constant, so their observation
    // density involves no latent state; weighting them would only reward
    // phi -> 0 (the density of a count at its own mean). Skip them.
    const int seed_len = int(seed.size());
    m.observed = [seed_len](int t, const TimeSeriesData& data) {
        return t > seed_len && !data.missing(t);
    };
    m.obs_logdensity = [](const StateHistory& h, const TimeSeriesData& data,
                          const ParamVector& theta) {
        const int t = h.t();
        return neg_binomial_logpmf(*data.local_cases[size_t(t - 1)], h.at_lag(0, 1),
                                   theta[1]);
    };
    m.obs_sampler = [](const StateHistory& h, const TimeSeriesData&,
                       const ParamVector& theta, Rng& rng) {
        return double(rng.neg_binomial(h.at_lag(0, 1), theta[1]));
    };
    m.prior = detail::uniform_box_prior({{0.0, 1.0}, {0.0, 1.0}});
    m.param_template =
        ParamVector{{"sigma", "phi"}, {0.2, 0.05}, {{0.0, 1.0}, {0.0, 1.0}}};
    return m;
}

// ---------------------------------------------------------------------------
// Model 3: hidden incidence (no imports), reporting delay via an incubation
// PMF, and one of three observation variants. Hidden state: (R, I).
// theta = (sigma, phi) plus c_1..c_6 for the day-of-week variant
// (c_7 = 7 - sum c_{1:6}).
// ---------------------------------------------------------------------------

enum class Model3Variant { day_of_week, aggregated, naive };

struct Model3Options {
    DiscretePMF generation_time = discretize_gamma(6.5, 4.2);
    DiscretePMF incubation = discretize_gamma(5.5, 2.3, 21);
    Model3Variant variant = Model3Variant::naive;
    double init_r_min = 0.1;
    double init_r_max = 10.0;
    std::vector<double> seed_incidence;
};

namespace detail {

// true when day t's expected report involves latent incidence: some delay
// lag with positive mass reaches a day past the pinned seeding window. Days
// that fail this are either structurally zero-mean (a positive count there
// would kill every particle) or fully determined by the pinned seeds (their
// density involves no latent state and only rewards phi -> 0), so they are
// treated as unobserved.
inline bool latent_reach(int t, const DiscretePMF& delay, int seed_len) {
    for (int u = 1; u <= delay.u_max(); ++u) {
        if (delay.probs[size_t(u - 1)] <= 0.0) continue;
        const int d = t - u;
        if (d >= 1 && d > seed_len) return true;
    }
    return false;
}

} // namespace detail

inline double day_of_week_rate(const ParamVector& theta, int weekday) {
    if (weekday == 7) {
        double c7 = 7.0;
        for (int i = 2; i <= 7; ++i) c7 -= theta[i];
        return c7;
    }
    return theta[1 + weekday]; // theta = (sigma, phi, c1..c6)
}

inline ModelSpec model3_spec(const Model3Options& opt) {
    opt.generation_time.validate();
    opt.incubation.validate();
    ModelSpec m;
    m.state_dim = 2;
    const int extra = opt.variant == Model3Variant::aggregated ? 6 : 0;
    m.required_lag =
        std::max(opt.generation_time.u_max(), opt.incubation.u_max() + extra);

    const DiscretePMF gen = opt.generation_time;
    const DiscretePMF inc = opt.incubation;
    const Model3Variant variant = opt.variant;
    const double log_rmin = std::log(opt.init_r_min);
    const double log_rmax = std::log(opt.init_r_max);
    const std::vector<double> seed = opt.seed_incidence;

    m.initial = [log_rmin, log_rmax](std::span<double> out, const ParamVector&,
                                     Rng& rng) {
        out[0] = std::exp(rng.uniform(log_rmin, log_rmax));
        out[1] = 0.0;
    };
    m.transition = [gen, seed](std::span<double> out, const StateHistory& h,
                               const TimeSeriesData& data, const ParamVector& theta,
                               Rng& rng) {
        const int t = h.t();
        out[0] = detail::lognormal_rw_step(h.at_lag(1, 0), theta[0], rng);
        if (size_t(t) <= seed.size()) {
            out[1] = seed[size_t(t - 1)];
        } else {
            double lam = out[0] * detail::state_force(h, data, gen, 1, false);
            lam = std::min(lam, detail::kIncidenceCap);
            out[1] = double(rng.poisson(lam));
        }
    };

    if (variant == Model3Variant::aggregated) {
        // weights only on week boundaries (t divisible by 7) where the whole
        // week is present; trailing partial weeks contribute nothing
        const int seed_len = int(seed.size());
        m.observed = [inc, seed_len](int t, const TimeSeriesData& data) {
            if (t % 7 != 0) return false;
            bool reachable = false;
            for (int i = t - 6; i <= t; ++i) {
                if (data.missing(i)) return false;
                reachable = reachable || detail::latent_reach(i, inc, seed_len);
            }
            return reachable;
        };
        m.obs_logdensity = [inc](const StateHistory& h, const TimeSeriesData& data,
                                 const ParamVector& theta) {
            const int t = h.t();
            long weekly = 0;
            double mu = 0.0;
            for (int i = 0; i < 7; ++i) {
                weekly += *data.local_cases[size_t(t - 1 - i)];
                mu += detail::delayed_mean(h, inc, 1, i);
            }
            return neg_binomial_logpmf(weekly, mu, theta[1]);
        };
        m.obs_sampler = [inc](const StateHistory& h, const TimeSeriesData&,
                              const ParamVector& theta, Rng& rng) {
            const int t = h.t();
            if (t % 7 != 0) return std::numeric_limits<double>::quiet_NaN();
            double mu = 0.0;
            for (int i = 0; i < 7; ++i) mu += detail::delayed_mean(h, inc, 1, i);
            return double(rng.neg_binomial(mu, theta[1]));
        };
    } else {
        const bool dow = variant == Model3Variant::day_of_week;
        const int seed_len = int(seed.size());
        m.observed = [inc, seed_len](int t, const TimeSeriesData& data) {
            return !data.missing(t) && detail::latent_reach(t, inc, seed_len);
        };
        m.obs_logdensity = [inc, dow](const StateHistory& h,
                                      const TimeSeriesData& data,
                                      const ParamVector& theta) {
            const int t = h.t();
            double mu = detail::delayed_mean(h, inc, 1);
            if (dow) mu *= day_of_week_rate(theta, iso_weekday(data.date(t)));
            return neg_binomial_logpmf(*data.local_cases[size_t(t - 1)], mu, theta[1]);
        };
        m.obs_sampler = [inc, dow](const StateHistory& h, const TimeSeriesData& data,
                                   const ParamVector& theta, Rng& rng) {
            const int t = h.t();
            double mu = detail::delayed_mean(h, inc, 1);
            if (dow) mu *= day_of_week_rate(theta, iso_weekday(data.date(t)));
            return double(rng.neg_binomial(mu, theta[1]));
        };
    }

    if (variant == Model3Variant::day_of_week) {
        ParamPrior prior;
        // sigma, phi ~ U(0,1); (c1..c6) uniform over {c_i > 0, sum < 7}
        prior.logpdf = [](std::span<const double> v) {
            if (v[0] <= 0.0 || v[0] >= 1.0) return kNegInf;
            if (v[1] <= 0.0 || v[1] >= 1.0) return kNegInf;
            double sum = 0.0;
            for (int i = 2; i < 8; ++i) {
                if (v[size_t(i)] <= 0.0) return kNegInf;
                sum += v[size_t(i)];
            }
            if (sum >= 7.0) return kNegInf; // c7 must be positive
            return 0.0;
        };
        prior.sample = [](std::span<double> out, Rng& rng) {
            out[0] = rng.uniform();
            out[1] = rng.uniform();
            // Dirichlet(1,...,1) over 7 entries scaled to sum 7; keep first 6
            double g[7], sum = 0.0;
            for (double& v : g) {
                v = rng.exponential();
                sum += v;
            }
            for (int i = 0; i < 6; ++i) out[size_t(2 + i)] = 7.0 * g[i] / sum;
        };
        m.prior = prior;
        m.param_template = ParamVector{
            {"sigma", "phi", "c1", "c2", "c3", "c4", "c5", "c6"},
            {0.1, 0.02, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0},
            {{0.0, 1.0}, {0.0, 1.0}, {0.0, 7.0}, {0.0, 7.0}, {0.0, 7.0},
             {0.0, 7.0}, {0.0, 7.0}, {0.0, 7.0}}};
    } else {
        m.prior = detail::uniform_box_prior({{0.0, 1.0}, {0.0, 1.0}});
        m.param_template =
            ParamVector{{"sigma", "phi"}, {0.1, 0.02}, {{0.0, 1.0}, {0.0, 1.0}}};
    }
    return m;
}

} // namespace rsmc

#endif

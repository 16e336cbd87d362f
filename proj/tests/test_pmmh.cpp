#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "rsmc/pmmh.hpp"

using namespace rsmc;

namespace {

// model whose log-likelihood is exact and independent of the particles:
// observation density Normal(y_t; theta, obs_sd), dummy state
ModelSpec exact_normal_model(double obs_sd, double lo = -10.0, double hi = 10.0) {
    ModelSpec m;
    m.state_dim = 1;
    m.required_lag = 1;
    m.initial = [](std::span<double> out, const ParamVector&, Rng&) { out[0] = 0.0; };
    m.transition = [](std::span<double> out, const StateHistory&,
                      const TimeSeriesData&, const ParamVector&, Rng&) {
        out[0] = 0.0;
    };
    m.observed = [](int t, const TimeSeriesData& d) { return !d.missing(t); };
    m.obs_logdensity = [obs_sd](const StateHistory& h, const TimeSeriesData& d,
                                const ParamVector& theta) {
        return normal_logpdf(d.local_or_zero(h.t()), theta[0], obs_sd);
    };
    m.obs_sampler = [obs_sd](const StateHistory&, const TimeSeriesData&,
                             const ParamVector& theta, Rng& rng) {
        return rng.normal(theta[0], obs_sd);
    };
    m.prior.logpdf = [lo, hi](std::span<const double> v) {
        return (v[0] > lo && v[0] < hi) ? 0.0 : kNegInf;
    };
    m.prior.sample = [lo, hi](std::span<double> out, Rng& rng) {
        out[0] = rng.uniform(lo, hi);
    };
    m.param_template = ParamVector{{"mu"}, {0.0}, {{lo, hi}}};
    return m;
}

// 2-state hidden Markov chain with known transition matrix and Gaussian
// emissions; exact likelihood by the forward algorithm
struct ToyHmm {
    double p_stay = 0.9;
    double means[2] = {0.0, 4.0};
    double sd = 1.0;

    ModelSpec spec() const {
        const double stay = p_stay;
        const double m0 = means[0], m1 = means[1], s = sd;
        ModelSpec m;
        m.state_dim = 1;
        m.required_lag = 1;
        m.initial = [](std::span<double> out, const ParamVector&, Rng& rng) {
            out[0] = rng.uniform() < 0.5 ? 0.0 : 1.0;
        };
        m.transition = [stay](std::span<double> out, const StateHistory& h,
                              const TimeSeriesData&, const ParamVector&, Rng& rng) {
            const double cur = h.at_lag(1, 0);
            out[0] = rng.uniform() < stay ? cur : 1.0 - cur;
        };
        m.observed = [](int t, const TimeSeriesData& d) { return !d.missing(t); };
        m.obs_logdensity = [m0, m1, s](const StateHistory& h,
                                       const TimeSeriesData& d, const ParamVector&) {
            const double mean = h.at_lag(0, 0) < 0.5 ? m0 : m1;
            return normal_logpdf(d.local_or_zero(h.t()) / 10.0, mean, s);
        };
        m.obs_sampler = [m0, m1, s](const StateHistory& h, const TimeSeriesData&,
                                    const ParamVector&, Rng& rng) {
            return rng.normal(h.at_lag(0, 0) < 0.5 ? m0 : m1, s) * 10.0;
        };
        m.prior.logpdf = [](std::span<const double>) { return 0.0; };
        m.prior.sample = [](std::span<double>, Rng&) {};
        m.param_template = ParamVector{{}, {}, {}};
        return m;
    }

    // exact forward-algorithm log-likelihood (observations stored as 10*y)
    double exact_loglik(const TimeSeriesData& data) const {
        double a0 = 0.5, a1 = 0.5;
        double ll = 0.0;
        for (int t = 1; t <= data.length(); ++t) {
            const double p0 = a0 * p_stay + a1 * (1.0 - p_stay);
            const double p1 = a1 * p_stay + a0 * (1.0 - p_stay);
            const double y = data.local_or_zero(t) / 10.0;
            const double l0 = p0 * std::exp(normal_logpdf(y, means[0], sd));
            const double l1 = p1 * std::exp(normal_logpdf(y, means[1], sd));
            ll += std::log(l0 + l1);
            a0 = l0 / (l0 + l1);
            a1 = l1 / (l0 + l1);
        }
        return ll;
    }

    TimeSeriesData sample_data(int T, std::uint64_t seed) const {
        Rng rng(seed);
        std::vector<long> y;
        double state = rng.uniform() < 0.5 ? 0.0 : 1.0;
        for (int t = 0; t < T; ++t) {
            if (t > 0 && rng.uniform() >= p_stay) state = 1.0 - state;
            const double mean = state < 0.5 ? means[0] : means[1];
            y.push_back(long(std::llround(rng.normal(mean, sd) * 10.0)));
        }
        TimeSeriesData d;
        d.start_date = make_date(2022, 1, 1);
        for (long v : y) d.local_cases.emplace_back(v);
        d.imported_cases.assign(y.size(), 0);
        return d;
    }
};

} // namespace

TEST_CASE("gelman_rubin") {
    SECTION("identical chains give sqrt((n-1)/n)") {
        std::vector<double> c = {1.0, 2.0, 3.0, 2.0, 1.0, 2.5};
        const double rhat = gelman_rubin({c, c, c});
        CHECK(rhat == Catch::Approx(std::sqrt(5.0 / 6.0)).epsilon(1e-12));
        CHECK(rhat < 1.0);
    }
    SECTION("same-distribution chains approach 1") {
        Rng rng(43);
        std::vector<std::vector<double>> chains(4, std::vector<double>(5000));
        for (auto& c : chains) {
            for (double& v : c) v = rng.normal();
        }
        std::vector<std::span<const double>> spans(chains.begin(), chains.end());
        CHECK(gelman_rubin(spans) == Catch::Approx(1.0).margin(0.01));
    }
    SECTION("well-separated chains blow past the threshold") {
        Rng rng(47);
        std::vector<double> a(200), b(200);
        for (double& v : a) v = 0.0 + 0.1 * rng.normal();
        for (double& v : b) v = 5.0 + 0.1 * rng.normal();
        CHECK(gelman_rubin({a, b}) > 1.05);
    }
}

TEST_CASE("chain_ess") {
    SECTION("i.i.d. chain has ESS near n") {
        Rng rng(53);
        std::vector<double> x(1000);
        for (double& v : x) v = rng.normal();
        const double ess = chain_ess(x);
        CHECK(ess > 800.0);
        CHECK(ess < 1200.0);
    }
    SECTION("AR(1) matches the analytic effective size") {
        const double phi = 0.9;
        Rng rng(59);
        const int n = 50000;
        std::vector<double> x(size_t(n), 0.0);
        x[0] = rng.normal();
        for (int i = 1; i < n; ++i) {
            x[size_t(i)] = phi * x[size_t(i - 1)] +
                           std::sqrt(1.0 - phi * phi) * rng.normal();
        }
        const double expect = double(n) * (1.0 - phi) / (1.0 + phi);
        CHECK(chain_ess(x) == Catch::Approx(expect).epsilon(0.15));
        CHECK(chain_ess(x) < 0.2 * double(n));
    }
    SECTION("constant chain reports 0") {
        std::vector<double> c(100, 3.14);
        CHECK(chain_ess(c) == 0.0);
    }
}

TEST_CASE("estimate_loglik: degenerate and exact cases") {
    // deterministic single-path model: estimator is exact for any N
    ModelSpec m = exact_normal_model(1.0);
    auto data = TimeSeriesData::from_counts(make_date(2020, 1, 1), {1, 2, 3});
    ParamVector theta = m.param_template.with_values({1.5});
    FilterConfig cfg{.n_particles = 2, .lag = 1, .seed = 1};
    double expect = 0.0;
    for (long y : {1, 2, 3}) expect += normal_logpdf(double(y), 1.5, 1.0);
    CHECK(estimate_loglik(m, data, theta, cfg) ==
          Catch::Approx(expect).epsilon(1e-12));
    // reporting helper: per-step geometric mean over observed days
    CHECK(per_step_mean_loglik(m, data, expect) ==
          Catch::Approx(expect / 3.0).epsilon(1e-12));

    // T = 1 with all weights 0.5 -> log 0.5
    ModelSpec half = m;
    half.obs_logdensity = [](const StateHistory&, const TimeSeriesData&,
                             const ParamVector&) { return std::log(0.5); };
    auto one = TimeSeriesData::from_counts(make_date(2020, 1, 1), {1});
    CHECK(estimate_loglik(half, one, theta, cfg) ==
          Catch::Approx(std::log(0.5)).epsilon(1e-12));

    // collapse maps to -inf rather than an exception
    ModelSpec dead = m;
    dead.obs_logdensity = [](const StateHistory&, const TimeSeriesData&,
                             const ParamVector&) { return kNegInf; };
    CHECK(estimate_loglik(dead, data, theta, cfg) == kNegInf);
}

TEST_CASE("estimate_loglik: unbiased on a toy HMM with exact forward oracle") {
    ToyHmm hmm;
    TimeSeriesData data = hmm.sample_data(40, 67);
    ModelSpec m = hmm.spec();
    const double exact = hmm.exact_loglik(data);

    const int refits = 30;
    std::vector<double> est(refits);
    for (int r = 0; r < refits; ++r) {
        FilterConfig cfg{.n_particles = 2000, .lag = 2,
                         .seed = std::uint64_t(1000 + r)};
        est[size_t(r)] = estimate_loglik(m, data, m.param_template, cfg);
    }
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / refits;
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    var /= double(refits - 1);
    const double se = std::sqrt(var / refits);
    CHECK(std::fabs(mean - exact) < 3.0 * se + 0.05);
}

TEST_CASE("run_pmmh: exact likelihood reduces to standard MH (conjugate check)") {
    // y_t ~ Normal(mu, 1), flat prior on a wide box: posterior is
    // Normal(y-bar, 1/T) up to truncation
    const double mu_true = 1.2;
    Rng dgen(71);
    const int T = 25;
    TimeSeriesData data;
    data.start_date = make_date(2021, 1, 1);
    double ybar = 0.0;
    for (int t = 0; t < T; ++t) {
        const long y = long(std::llround(dgen.normal(mu_true, 1.0)));
        data.local_cases.emplace_back(y);
        ybar += double(y);
    }
    ybar /= T;
    data.imported_cases.assign(size_t(T), 0);

    ModelSpec m = exact_normal_model(1.0);
    PmmhConfig cfg;
    cfg.n_chains = 2;
    cfg.filter.n_particles = 2; // exact likelihood regardless of N
    cfg.max_adapt_iterations = 500;
    cfg.max_primary_iterations = 3000;
    cfg.seed = 9;
    ChainSet cs = run_pmmh(m, data, cfg);
    REQUIRE(cs.n_samples() > 200);

    const double post_mean = cs.posterior_mean(0);
    auto pooled = cs.pooled(0);
    double var = 0.0;
    for (double v : pooled) var += (v - post_mean) * (v - post_mean);
    var /= double(pooled.size() - 1);

    const double se = 1.0 / std::sqrt(double(T));
    CHECK(std::fabs(post_mean - ybar) < 4.0 * se / std::sqrt(50.0) + 0.05);
    CHECK(var == Catch::Approx(1.0 / T).epsilon(0.4));

    // invariants: all samples in bounds, acceptance rates in [0,1]
    for (const auto& chain : cs.chains) {
        for (const auto& s : chain) {
            REQUIRE(s[0] > -10.0);
            REQUIRE(s[0] < 10.0);
        }
    }
    for (double a : cs.acceptance_rate) {
        REQUIRE(a >= 0.0);
        REQUIRE(a <= 1.0);
    }
}

TEST_CASE("run_pmmh: likelihood evaluated once per proposal (reuse on reject)") {
    // count filter runs via initial-sampler invocations
    static long init_calls;
    static long out_of_support;
    init_calls = 0;
    out_of_support = 0;
    ModelSpec m = exact_normal_model(1.0);
    auto base_init = m.initial;
    m.initial = [base_init](std::span<double> out, const ParamVector& th, Rng& rng) {
        ++init_calls;
        base_init(out, th, rng);
    };
    auto base_logpdf = m.prior.logpdf;
    m.prior.logpdf = [base_logpdf](std::span<const double> v) {
        const double lp = base_logpdf(v);
        if (lp == kNegInf) ++out_of_support;
        return lp;
    };
    auto data = TimeSeriesData::from_counts(make_date(2021, 1, 1), {1, 2, 1, 0, 2});
    PmmhConfig cfg;
    cfg.n_chains = 2;
    cfg.filter.n_particles = 4;
    cfg.chunk = 50;
    cfg.max_adapt_iterations = 100;
    cfg.max_primary_iterations = 200;
    cfg.seed = 3;
    ChainSet cs = run_pmmh(m, data, cfg);
    const long filter_runs = init_calls / cfg.filter.n_particles;
    // exactly one likelihood estimate per in-support proposal (plus the
    // per-chain initialization, which total_iterations counts as an
    // iteration); out-of-support proposals are rejected without running
    // the filter, and rejected moves reuse the stored estimate
    CHECK(filter_runs == cs.total_iterations - out_of_support);
}

TEST_CASE("run_pmmh rejects fewer than two chains") {
    ModelSpec m = exact_normal_model(1.0);
    auto data = TimeSeriesData::from_counts(make_date(2021, 1, 1), {1});
    PmmhConfig cfg;
    cfg.n_chains = 1;
    CHECK_THROWS_AS(run_pmmh(m, data, cfg), std::invalid_argument);
}

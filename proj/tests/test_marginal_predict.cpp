#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rsmc/marginal.hpp"
#include "rsmc/models.hpp"
#include "rsmc/predict.hpp"
#include "rsmc/eval.hpp"
#include "rsmc/sim.hpp"

using namespace rsmc;

namespace {

// deterministic state equal to theta; no observations carry weight
ModelSpec theta_echo_model() {
    ModelSpec m;
    m.state_dim = 1;
    m.required_lag = 1;
    m.initial = [](std::span<double> out, const ParamVector& th, Rng&) {
        out[0] = th[0];
    };
    m.transition = [](std::span<double> out, const StateHistory&,
                      const TimeSeriesData&, const ParamVector& th, Rng&) {
        out[0] = th[0];
    };
    m.observed = [](int, const TimeSeriesData&) { return false; };
    m.obs_logdensity = [](const StateHistory&, const TimeSeriesData&,
                          const ParamVector&) { return 0.0; };
    m.obs_sampler = [](const StateHistory& h, const TimeSeriesData&,
                       const ParamVector&, Rng&) { return h.at_lag(0, 0); };
    m.prior.logpdf = [](std::span<const double>) { return 0.0; };
    m.prior.sample = [](std::span<double> out, Rng& rng) { out[0] = rng.uniform(); };
    m.param_template = ParamVector{{"a"}, {0.5}, {{0.0, 100.0}}};
    return m;
}

// constant hidden state with Poisson observations of fixed mean
ModelSpec constant_poisson_model(double mu) {
    ModelSpec m;
    m.state_dim = 1;
    m.required_lag = 1;
    m.initial = [mu](std::span<double> out, const ParamVector&, Rng&) { out[0] = mu; };
    m.transition = [mu](std::span<double> out, const StateHistory&,
                        const TimeSeriesData&, const ParamVector&, Rng&) {
        out[0] = mu;
    };
    m.observed = [](int t, const TimeSeriesData& d) { return !d.missing(t); };
    m.obs_logdensity = [](const StateHistory& h, const TimeSeriesData& d,
                          const ParamVector&) {
        return poisson_logpmf(*d.local_cases[size_t(h.t() - 1)], h.at_lag(0, 0));
    };
    m.obs_sampler = [](const StateHistory& h, const TimeSeriesData&,
                       const ParamVector&, Rng& rng) {
        return double(rng.poisson(h.at_lag(0, 0)));
    };
    m.prior.logpdf = [](std::span<const double>) { return 0.0; };
    m.prior.sample = [](std::span<double>, Rng&) {};
    m.param_template = ParamVector{{}, {}, {}};
    return m;
}

ChainSet single_atom_chainset(const std::vector<double>& theta, int n = 50) {
    ChainSet cs;
    cs.param_names.resize(theta.size(), "p");
    cs.chains = {std::vector<std::vector<double>>(size_t(n), theta),
                 std::vector<std::vector<double>>(size_t(n), theta)};
    cs.converged = true;
    return cs;
}

TimeSeriesData blank_series(int T) {
    TimeSeriesData d;
    d.start_date = make_date(2023, 1, 1);
    d.local_cases.assign(size_t(T), std::nullopt);
    d.imported_cases.assign(size_t(T), 0);
    return d;
}

} // namespace

TEST_CASE("sample_marginal: block structure and particle count") {
    ModelSpec m = theta_echo_model();
    TimeSeriesData data = blank_series(6);
    ChainSet cs = single_atom_chainset({2.5});
    MarginalConfig cfg;
    cfg.n_theta = 4;
    cfg.filter.n_particles = 10;
    MarginalPosterior post = sample_marginal(m, data, cs, cfg);
    CHECK(post.n_particles() == 40);
    REQUIRE(post.blocks.size() == 4);
    for (const auto& b : post.blocks) {
        CHECK(b.theta[0] == 2.5);
        CHECK(b.filter.n == 10);
    }
    // degenerate chainset: identical to the conditional posterior at theta*
    auto s = post.pooled_state(3, 0);
    for (double v : s) CHECK(v == 2.5);
}

TEST_CASE("sample_marginal: two-atom mixture averages the conditionals") {
    ModelSpec m = theta_echo_model();
    TimeSeriesData data = blank_series(5);
    ChainSet cs;
    cs.param_names = {"a"};
    std::vector<std::vector<double>> alternating;
    for (int i = 0; i < 100; ++i) {
        alternating.push_back({i % 2 == 0 ? 1.0 : 3.0});
    }
    cs.chains = {alternating, alternating};
    MarginalConfig cfg;
    cfg.n_theta = 400;
    cfg.filter.n_particles = 4;
    cfg.seed = 21;
    MarginalPosterior post = sample_marginal(m, data, cs, cfg);
    auto s = post.pooled_state(2, 0);
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= double(s.size());
    // conditional means are 1 and 3; the mixture mean is 2
    CHECK(mean == Catch::Approx(2.0).margin(0.15));
    CHECK_THROWS_AS(sample_marginal(m, data, ChainSet{}, cfg),
                    std::invalid_argument);
}

TEST_CASE("marginal CrIs at least as wide as conditional-at-mean (model 1)") {
    Model1Options opt;
    opt.seed_obs.assign(size_t(discretize_gamma(6.5, 4.2).u_max()), 10.0);
    ModelSpec sim_model = model1_spec(opt);
    ParamVector truth = sim_model.param_template.with_values({0.25});
    TimeSeriesData data =
        simulate(sim_model, truth, 50, make_date(2020, 3, 1), 3).observations;

    ModelSpec m = model1_spec();
    // two-atom chainset straddling the truth
    ChainSet cs;
    cs.param_names = {"sigma"};
    std::vector<std::vector<double>> v;
    for (int i = 0; i < 50; ++i) v.push_back({i % 2 == 0 ? 0.1 : 0.5});
    cs.chains = {v, v};

    MarginalConfig cfg;
    cfg.n_theta = 30;
    cfg.filter.n_particles = 300;
    MarginalPosterior marg = sample_marginal(m, data, cs, cfg);

    FilterConfig fcfg = cfg.filter;
    fcfg.seed = 77;
    MarginalPosterior cond = conditional_posterior(
        m, data, m.param_template.with_values({0.3}), fcfg);

    int wider = 0, days = 0;
    for (int t = 5; t <= data.length(); ++t) {
        auto sm = marg.pooled_state(t, 0);
        auto sc = cond.pooled_state(t, 0);
        const double wm = quantile(sm, 0.975) - quantile(sm, 0.025);
        const double wc = quantile(sc, 0.975) - quantile(sc, 0.025);
        ++days;
        if (wm >= wc * 0.95) ++wider;
    }
    CHECK(double(wider) / days >= 0.8);
}

TEST_CASE("predictive draws follow the observation model (Poisson moments)") {
    ModelSpec m = constant_poisson_model(10.0);
    auto data = TimeSeriesData::from_counts(make_date(2023, 1, 1),
                                            std::vector<long>(20, 10));
    FilterConfig cfg{.n_particles = 4000, .lag = 3, .seed = 5,
                     .predictive = PredictiveMode::smoothing};
    FilterOutput out = run_filter(m, data, m.param_template, cfg);
    double s = 0.0, s2 = 0.0;
    long n = 0;
    for (int t = 1; t <= 20; ++t) {
        for (int i = 0; i < out.n; ++i) {
            const double v = out.predictive_draw(t, i);
            s += v;
            s2 += v * v;
            ++n;
        }
    }
    const double mean = s / double(n);
    const double var = s2 / double(n) - mean * mean;
    CHECK(mean == Catch::Approx(10.0).margin(0.1));
    CHECK(var == Catch::Approx(10.0).margin(0.4));
}

TEST_CASE("deterministic observation model: predictive equals the state") {
    // obs_sampler echoes the state; smoothing-mode draws must stay aligned
    // with their trajectories through resampling
    ModelSpec m = theta_echo_model();
    m.transition = [](std::span<double> out, const StateHistory& h,
                      const TimeSeriesData&, const ParamVector&, Rng& rng) {
        out[0] = h.at_lag(1, 0) + rng.normal();
    };
    m.initial = [](std::span<double> out, const ParamVector&, Rng& rng) {
        out[0] = rng.normal();
    };
    m.observed = [](int t, const TimeSeriesData&) { return t % 2 == 0; };
    m.obs_logdensity = [](const StateHistory& h, const TimeSeriesData&,
                          const ParamVector&) {
        return normal_logpdf(h.at_lag(0, 0), 0.0, 1.0);
    };
    TimeSeriesData data = blank_series(15);
    FilterConfig cfg{.n_particles = 200, .lag = 4, .seed = 6,
                     .predictive = PredictiveMode::smoothing};
    FilterOutput out = run_filter(m, data, m.param_template, cfg);
    for (int t = 1; t <= 15; ++t) {
        for (int i = 0; i < out.n; ++i) {
            REQUIRE(out.predictive_draw(t, i) == out.state(t, i, 0));
        }
    }
}

TEST_CASE("project: degenerate cases") {
    SECTION("K = 0 returns an empty projection") {
        ModelSpec m = theta_echo_model();
        TimeSeriesData data = blank_series(4);
        MarginalPosterior post = conditional_posterior(
            m, data, m.param_template.with_values({1.0}), FilterConfig{.n_particles = 8});
        ProjectionResult proj = project(m, data, post, 0);
        CHECK(proj.horizon == 0);
        CHECK(proj.hidden.empty());
    }
    SECTION("R pinned to 0: projected incidence and observations are 0") {
        Model2Options opt;
        opt.init_r_min = 1e-9;
        opt.init_r_max = 1e-8;
        ModelSpec m = model2_spec(opt);
        // zero history: absorbing zero incidence
        TimeSeriesData data = TimeSeriesData::from_counts(
            make_date(2020, 1, 1), std::vector<long>(20, 0));
        ParamVector theta = m.param_template.with_values({1e-6, 0.01});
        MarginalPosterior post =
            conditional_posterior(m, data, theta, FilterConfig{.n_particles = 50});
        ProjectionResult proj = project(m, data, post, 14);
        for (int k = 1; k <= 14; ++k) {
            for (double v : proj.pooled_hidden(k, 1)) REQUIRE(v == 0.0);
            for (double v : proj.pooled_obs(k)) REQUIRE(v == 0.0);
        }
    }
    SECTION("flat deterministic incidence projects its own mean") {
        ModelSpec m = constant_poisson_model(100.0);
        auto data = TimeSeriesData::from_counts(make_date(2023, 1, 1),
                                                std::vector<long>(10, 100));
        MarginalPosterior post = conditional_posterior(
            m, data, m.param_template, FilterConfig{.n_particles = 2000});
        ProjectionResult proj = project(m, data, post, 5);
        for (int k = 1; k <= 5; ++k) {
            for (double v : proj.pooled_hidden(k, 0)) REQUIRE(v == 100.0);
            auto obs = proj.pooled_obs(k);
            double mean = 0.0;
            for (double v : obs) mean += v;
            mean /= double(obs.size());
            REQUIRE(mean == Catch::Approx(100.0).margin(1.0));
            for (double v : obs) REQUIRE(v >= 0.0);
        }
    }
}

TEST_CASE("elimination probability") {
    Model2Options opt;
    opt.generation_time = discretize_gamma(6.5, 4.2);
    ModelSpec m = model2_spec(opt);

    SECTION("zero incidence everywhere: probability 1") {
        TimeSeriesData data = TimeSeriesData::from_counts(
            make_date(2020, 1, 1), std::vector<long>(30, 0));
        ParamVector theta = m.param_template.with_values({0.1, 0.01});
        Rng rng(31);
        double p = -1.0;
        StepObserver obs = [&](const FilterFrame& f) {
            if (f.t == data.length()) {
                Rng r(31);
                p = elimination_probability(m, data, theta, f, 28, r);
            }
        };
        run_filter(m, data, theta, FilterConfig{.n_particles = 100, .seed = 8},
                   obs);
        CHECK(p == 1.0);
    }
    SECTION("huge incidence: probability ~ 0 and monotone in incidence") {
        Model2Options o2;
        o2.generation_time = discretize_gamma(6.5, 4.2);
        o2.seed_incidence = std::vector<double>(
            size_t(o2.generation_time.u_max()), 1e5);
        ModelSpec big = model2_spec(o2);
        auto data = TimeSeriesData::from_counts(
            make_date(2020, 1, 1),
            std::vector<long>(o2.generation_time.u_max(), 100000));
        ParamVector theta = big.param_template.with_values({0.05, 0.01});
        double p_big = -1.0;
        StepObserver obs = [&](const FilterFrame& f) {
            if (f.t == data.length()) {
                Rng r(33);
                p_big = elimination_probability(big, data, theta, f, 28, r);
            }
        };
        run_filter(big, data, theta,
                   FilterConfig{.n_particles = 50, .seed = 9}, obs);
        CHECK(p_big == 0.0); // current incidence already nonzero
    }
}

TEST_CASE("peak_statistics") {
    // deterministic strictly decreasing trajectories: peak on the first day
    ModelSpec m = theta_echo_model();
    m.initial = [](std::span<double> out, const ParamVector&, Rng&) {
        out[0] = 100.0;
    };
    m.transition = [](std::span<double> out, const StateHistory& h,
                      const TimeSeriesData&, const ParamVector&, Rng&) {
        out[0] = h.at_lag(1, 0) - 1.0;
    };
    TimeSeriesData data = blank_series(12);
    FilterConfig cfg{.n_particles = 20, .lag = 6};
    MarginalPosterior post =
        conditional_posterior(m, data, m.param_template, cfg);
    auto peaks = peak_statistics(post, data, 5, 0);
    REQUIRE(peaks.size() == 20);
    for (const auto& p : peaks) {
        CHECK(p.day == 8); // first day of the window t = 8..12
        CHECK(p.peak == 100.0 - 8.0);
        CHECK(p.date == data.date(8));
    }
    // window wider than the jointly valid lag window is rejected
    CHECK_THROWS_AS(peak_statistics(post, data, 8, 0), std::invalid_argument);
}

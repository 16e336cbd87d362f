#ifndef RSMC_PMMH_HPP
#define RSMC_PMMH_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "rsmc/filter.hpp"

namespace rsmc {

// ---------------------------------------------------------------------------
// Likelihood estimation
// ---------------------------------------------------------------------------

// log-likelihood estimate: sum over observed days of log w-bar_t. Returns
// -inf on filter collapse (the proposal is then auto-rejected).
inline double estimate_loglik(const ModelSpec& model, const TimeSeriesData& data,
                              const ParamVector& theta, const FilterConfig& cfg) {
    try {
        return run_filter(model, data, theta, cfg).log_likelihood();
    } catch (const filter_collapse_error&) {
        return kNegInf;
    }
}

// reporting-only per-step geometric mean of the unnormalized weights
inline double per_step_mean_loglik(const ModelSpec& model,
                                   const TimeSeriesData& data, double loglik_sum) {
    int observed = 0;
    for (int t = 1; t <= data.length(); ++t) {
        if (model.observed(t, data)) ++observed;
    }
    return observed > 0 ? loglik_sum / observed : 0.0;
}

// ---------------------------------------------------------------------------
// Convergence diagnostics
// ---------------------------------------------------------------------------

// Classic Gelman-Rubin R-hat from C >= 2 equal-length chains of one
// parameter. Degenerate (zero within-chain variance) returns NaN.
inline double gelman_rubin(const std::vector<std::span<const double>>& chains) {
    const size_t C = chains.size();
    if (C < 2) throw std::invalid_argument("gelman_rubin: need >= 2 chains");
    const size_t n = chains[0].size();
    if (n < 2) throw std::invalid_argument("gelman_rubin: need chain length >= 2");
    for (const auto& c : chains) {
        if (c.size() != n) {
            throw std::invalid_argument("gelman_rubin: unequal chain lengths");
        }
    }
    std::vector<double> means(C);
    double W = 0.0;
    for (size_t c = 0; c < C; ++c) {
        double m = 0.0;
        for (double v : chains[c]) m += v;
        m /= double(n);
        means[c] = m;
        double s2 = 0.0;
        for (double v : chains[c]) s2 += (v - m) * (v - m);
        W += s2 / double(n - 1);
    }
    W /= double(C);
    double grand = std::accumulate(means.begin(), means.end(), 0.0) / double(C);
    double B = 0.0;
    for (double m : means) B += (m - grand) * (m - grand);
    B *= double(n) / double(C - 1);
    if (W <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double var_plus = (double(n - 1) / double(n)) * W + B / double(n);
    return std::sqrt(var_plus / W);
}

// Effective sample size of one chain: n / (1 + 2 sum rho_k), autocorrelations
// truncated by Geyer's initial positive sequence. Constant chains report 0.
inline double chain_ess(std::span<const double> x) {
    const size_t n = x.size();
    if (n < 10) throw std::invalid_argument("chain_ess: need length >= 10");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(n);
    double gamma0 = 0.0;
    for (double v : x) gamma0 += (v - mean) * (v - mean);
    gamma0 /= double(n);
    // a numerically constant chain carries no information
    if (gamma0 <= 1e-14 * std::max(1.0, mean * mean)) return 0.0;

    auto autocov = [&](size_t k) {
        double g = 0.0;
        for (size_t i = 0; i + k < n; ++i) g += (x[i] - mean) * (x[i + k] - mean);
        return g / double(n);
    };

    // tau = -1 + 2 * sum of positive pair sums Gamma_m = rho_{2m} + rho_{2m+1}
    double tau = -1.0;
    for (size_t m = 0; 2 * m + 1 < n; ++m) {
        double pair = (autocov(2 * m) + autocov(2 * m + 1)) / gamma0;
        if (pair <= 0.0) break;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1e-12);
    return double(n) / tau;
}

// ---------------------------------------------------------------------------
// Adaptive multivariate normal proposal
// ---------------------------------------------------------------------------

namespace detail {

// lower Cholesky factor of a symmetric positive-definite matrix (row-major);
// returns false if the factorization fails
inline bool cholesky(std::vector<double>& a, int d) {
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[size_t(i) * d + j];
            for (int k = 0; k < j; ++k) {
                s -= a[size_t(i) * d + k] * a[size_t(j) * d + k];
            }
            if (i == j) {
                if (s <= 0.0) return false;
                a[size_t(i) * d + j] = std::sqrt(s);
            } else {
                a[size_t(i) * d + j] = s / a[size_t(j) * d + j];
            }
        }
        for (int j = i + 1; j < d; ++j) a[size_t(i) * d + j] = 0.0;
    }
    return true;
}

inline std::vector<double> sample_covariance(
    const std::vector<std::vector<double>>& samples, int d) {
    const size_t n = samples.size();
    std::vector<double> mean(size_t(d), 0.0);
    for (const auto& s : samples) {
        for (int j = 0; j < d; ++j) mean[size_t(j)] += s[size_t(j)];
    }
    for (double& m : mean) m /= double(n);
    std::vector<double> cov(size_t(d) * d, 0.0);
    for (const auto& s : samples) {
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j <= i; ++j) {
                cov[size_t(i) * d + j] +=
                    (s[size_t(i)] - mean[size_t(i)]) * (s[size_t(j)] - mean[size_t(j)]);
            }
        }
    }
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            cov[size_t(i) * d + j] /= double(n > 1 ? n - 1 : 1);
            cov[size_t(j) * d + i] = cov[size_t(i) * d + j];
        }
    }
    return cov;
}

} // namespace detail

// Random-walk proposal with covariance (2.38^2/d) * Sigma-hat, jittered to
// stay positive-definite.
class ProposalState {
public:
    ProposalState(const ParamVector& tmpl)
        : d_(tmpl.dim()), chol_(size_t(d_) * d_, 0.0) {
        // initial diagonal: sd = 0.1 * prior range per parameter
        std::vector<double> cov(size_t(d_) * d_, 0.0);
        for (int i = 0; i < d_; ++i) {
            double range = tmpl.bounds[size_t(i)].second - tmpl.bounds[size_t(i)].first;
            double sd = std::isfinite(range) ? 0.1 * range : 1.0;
            cov[size_t(i) * d_ + i] = sd * sd;
        }
        set_covariance(cov);
    }

    // Sigma = (2.38^2/d) * cov(samples) + jitter * I
    void update(const std::vector<std::vector<double>>& samples) {
        std::vector<double> cov = detail::sample_covariance(samples, d_);
        const double scale = 2.38 * 2.38 / double(d_);
        double trace = 0.0;
        for (int i = 0; i < d_; ++i) trace += cov[size_t(i) * d_ + i];
        const double jitter = std::max(1e-12, 1e-9 * trace / double(d_));
        for (auto& v : cov) v *= scale;
        for (int i = 0; i < d_; ++i) cov[size_t(i) * d_ + i] += jitter;
        set_covariance(cov);
    }

    // |Sigma| = prod diag(L)^2
    double determinant() const {
        double det = 1.0;
        for (int i = 0; i < d_; ++i) {
            double l = chol_[size_t(i) * d_ + i];
            det *= l * l;
        }
        return det;
    }

    std::vector<double> propose(std::span<const double> theta, Rng& rng) const {
        std::vector<double> z(std::size_t(d_), 0.0);
        for (double& v : z) v = rng.normal();
        std::vector<double> out(theta.begin(), theta.end());
        for (int i = 0; i < d_; ++i) {
            double dot = 0.0;
            for (int j = 0; j <= i; ++j) dot += chol_[size_t(i) * d_ + j] * z[size_t(j)];
            out[size_t(i)] += dot;
        }
        return out;
    }

    const std::vector<double>& cholesky_factor() const { return chol_; }

private:
    void set_covariance(std::vector<double> cov) {
        // escalate the jitter until the factorization succeeds
        for (int attempt = 0; attempt < 8; ++attempt) {
            std::vector<double> a = cov;
            if (detail::cholesky(a, d_)) {
                chol_ = std::move(a);
                return;
            }
            double trace = 0.0;
            for (int i = 0; i < d_; ++i) trace += cov[size_t(i) * d_ + i];
            double bump = std::max(1e-12, 1e-6 * trace / double(d_)) *
                          std::pow(10.0, attempt);
            for (int i = 0; i < d_; ++i) cov[size_t(i) * d_ + i] += bump;
        }
        throw std::runtime_error("proposal covariance is not positive definite");
    }

    int d_;
    std::vector<double> chol_;
};

// ---------------------------------------------------------------------------
// PMMH driver
// ---------------------------------------------------------------------------

struct PmmhConfig {
    int n_chains = 4;
    FilterConfig filter{.n_particles = 1000};
    int chunk = 100;              // adaptation / diagnostic cadence
    double rhat_threshold = 1.05;
    double min_ess = 100.0;
    double adapt_tol = 0.2;       // relative |Sigma| change marking stability
    int max_adapt_iterations = 2000;  // per chain
    int max_primary_iterations = 5000; // per chain
    std::uint64_t seed = 1;
};

struct ChainSet {
    std::vector<std::string> param_names;
    // post-burn-in samples: [chain][iteration][parameter]
    std::vector<std::vector<std::vector<double>>> chains;
    std::vector<std::vector<double>> loglik; // aligned with chains
    std::vector<double> acceptance_rate;     // per chain, primary phase
    std::vector<double> rhat;                // per parameter
    std::vector<double> ess;                 // per parameter, summed over chains
    bool converged = false;
    int burnin_per_chain = 0;
    long total_iterations = 0;

    int n_params() const { return int(param_names.size()); }

    size_t n_samples() const {
        size_t n = 0;
        for (const auto& c : chains) n += c.size();
        return n;
    }

    std::vector<double> pooled(int param) const {
        std::vector<double> out;
        out.reserve(n_samples());
        for (const auto& c : chains) {
            for (const auto& s : c) out.push_back(s[size_t(param)]);
        }
        return out;
    }

    double posterior_mean(int param) const {
        auto v = pooled(param);
        return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    }
};

namespace detail {

struct PmmhChain {
    std::vector<std::vector<double>> history; // all samples (adapt + primary)
    std::vector<double> loglik_history;
    ProposalState proposal;
    Rng rng;
    double cur_loglik = kNegInf;
    double cur_logprior = kNegInf;
    std::vector<double> cur;
    bool stabilized = false;
    double prev_det = -1.0;
    long accepted_primary = 0;
    long primary_iters = 0;
    long accepted_since_start = 0;
    std::uint64_t eval_counter = 0;

    PmmhChain(const ParamVector& tmpl, std::uint64_t seed, int chain_id)
        : proposal(tmpl), rng(seed, 0xC0, std::uint64_t(chain_id)) {}
};

} // namespace detail

// Algorithm: particle marginal Metropolis-Hastings with adaptive MVN
// proposals. Each chain adapts its proposal covariance every `chunk`
// iterations until |Sigma| stabilizes, then all chains run primary sampling
// in chunks until R-hat and ESS thresholds are met. Adaptation samples plus
// the first primary chunk are discarded as burn-in.
inline ChainSet run_pmmh(const ModelSpec& model, const TimeSeriesData& data,
                         const PmmhConfig& cfg) {
    const ParamVector& tmpl = model.param_template;
    const int d = tmpl.dim();
    const int C = cfg.n_chains;
    if (C < 2) throw std::invalid_argument("run_pmmh: need >= 2 chains");

    std::vector<detail::PmmhChain> chains;
    chains.reserve(size_t(C));
    for (int c = 0; c < C; ++c) chains.emplace_back(tmpl, cfg.seed, c);

    auto loglik_at = [&](detail::PmmhChain& ch, int chain_id,
                         std::span<const double> values) {
        FilterConfig fcfg = cfg.filter;
        std::uint64_t ctr = ++ch.eval_counter;
        fcfg.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (std::uint64_t(chain_id) + 1)) ^
                    (ctr * 0xbf58476d1ce4e5b9ULL);
        ParamVector theta = tmpl.with_values({values.begin(), values.end()});
        return estimate_loglik(model, data, theta, fcfg);
    };

    // initialize from the prior; retry until the filter does not collapse
    for (int c = 0; c < C; ++c) {
        auto& ch = chains[size_t(c)];
        ch.cur.resize(size_t(d));
        bool ok = false;
        for (int tries = 0; tries < 100 && !ok; ++tries) {
            model.prior.sample(ch.cur, ch.rng);
            ch.cur_logprior = model.prior.logpdf(ch.cur);
            if (ch.cur_logprior == kNegInf) continue;
            ch.cur_loglik = loglik_at(ch, c, ch.cur);
            ok = std::isfinite(ch.cur_loglik);
        }
        if (!ok) {
            throw std::runtime_error(
                "run_pmmh: could not initialize chain (filter collapses at "
                "prior draws)");
        }
        ch.history.push_back(ch.cur);
        ch.loglik_history.push_back(ch.cur_loglik);
    }

    auto mh_step = [&](detail::PmmhChain& ch, int chain_id) {
        std::vector<double> prop = ch.proposal.propose(ch.cur, ch.rng);
        double lp = model.prior.logpdf(prop);
        bool accept = false;
        if (lp > kNegInf) {
            // symmetric proposal: q-ratio is 1
            double ll = loglik_at(ch, chain_id, prop);
            double log_alpha = (ll - ch.cur_loglik) + (lp - ch.cur_logprior);
            if (log_alpha >= 0.0 || std::log(ch.rng.uniform()) < log_alpha) {
                ch.cur = std::move(prop);
                ch.cur_loglik = ll; // rejected proposals keep the stored loglik
                ch.cur_logprior = lp;
                accept = true;
            }
        }
        ch.history.push_back(ch.cur);
        ch.loglik_history.push_back(ch.cur_loglik);
        return accept;
    };

    // --- adaptation phase ---
    long adapt_iters = 0;
    for (;;) {
        bool all_stable = true;
        for (auto& ch : chains) all_stable = all_stable && ch.stabilized;
        if (all_stable || adapt_iters >= cfg.max_adapt_iterations) break;
        for (int c = 0; c < C; ++c) {
            auto& ch = chains[size_t(c)];
            for (int k = 0; k < cfg.chunk; ++k) {
                if (mh_step(ch, c)) ++ch.accepted_since_start;
            }
            if (ch.stabilized) continue;
            ch.proposal.update(ch.history);
            double det = ch.proposal.determinant();
            if (ch.prev_det > 0.0 && ch.accepted_since_start >= 5 &&
                std::fabs(det / ch.prev_det - 1.0) < cfg.adapt_tol) {
                ch.stabilized = true;
            }
            ch.prev_det = det;
        }
        adapt_iters += cfg.chunk;
    }
    const size_t adapt_len = chains[0].history.size();

    // --- primary phase ---
    ChainSet out;
    out.param_names = tmpl.names;
    out.acceptance_rate.assign(size_t(C), 0.0);
    out.rhat.assign(size_t(d), std::numeric_limits<double>::quiet_NaN());
    out.ess.assign(size_t(d), 0.0);

    long primary_iters = 0;
    bool converged = false;
    while (!converged && primary_iters < cfg.max_primary_iterations) {
        for (int c = 0; c < C; ++c) {
            auto& ch = chains[size_t(c)];
            for (int k = 0; k < cfg.chunk; ++k) {
                if (mh_step(ch, c)) ++ch.accepted_primary;
                ++ch.primary_iters;
            }
        }
        primary_iters += cfg.chunk;

        // diagnostics over post-burn-in samples (burn-in: adaptation + first
        // primary chunk)
        const long post = primary_iters - cfg.chunk;
        if (post < 2 * cfg.chunk) continue;
        converged = true;
        for (int p = 0; p < d; ++p) {
            std::vector<std::vector<double>> per_chain(std::size_t(C), std::vector<double>{});
            std::vector<std::span<const double>> spans;
            for (int c = 0; c < C; ++c) {
                const auto& hist = chains[size_t(c)].history;
                auto& seq = per_chain[size_t(c)];
                seq.reserve(size_t(post));
                for (size_t i = adapt_len + size_t(cfg.chunk); i < hist.size(); ++i) {
                    seq.push_back(hist[i][size_t(p)]);
                }
                spans.emplace_back(seq);
            }
            double rh = gelman_rubin(spans);
            double ess = 0.0;
            for (auto& seq : per_chain) ess += chain_ess(seq);
            out.rhat[size_t(p)] = rh;
            out.ess[size_t(p)] = ess;
            if (!(rh < cfg.rhat_threshold) || !(ess > cfg.min_ess)) converged = false;
        }
    }

    out.converged = converged;
    out.burnin_per_chain = int(adapt_len) + cfg.chunk;
    out.total_iterations = long(adapt_len) * C + primary_iters * C;
    out.chains.resize(size_t(C));
    out.loglik.resize(size_t(C));
    for (int c = 0; c < C; ++c) {
        auto& ch = chains[size_t(c)];
        const size_t from = adapt_len + size_t(cfg.chunk);
        for (size_t i = from; i < ch.history.size(); ++i) {
            out.chains[size_t(c)].push_back(ch.history[i]);
            out.loglik[size_t(c)].push_back(ch.loglik_history[i]);
        }
        out.acceptance_rate[size_t(c)] =
            ch.primary_iters > 0 ? double(ch.accepted_primary) / double(ch.primary_iters)
                                 : 0.0;
    }
    return out;
}

} // namespace rsmc

#endif

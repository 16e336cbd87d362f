#ifndef RSMC_MARGINAL_HPP
#define RSMC_MARGINAL_HPP

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "rsmc/filter.hpp"
#include "rsmc/pmmh.hpp"

namespace rsmc {

// Marginal smoothing posterior P(X_t | y_{1:T}): a uniform mixture of
// conditional filters over parameter draws. Block i holds the N trajectories
// of the filter run at theta_i, so N_p = N_theta * N rows in total.
struct MarginalPosterior {
    struct Block {
        ParamVector theta;
        FilterOutput filter;
    };
    std::vector<Block> blocks;
    int n_theta = 0;
    int n_per_filter = 0;
    int T = 0;
    int state_dim = 1;

    long n_particles() const { return long(n_theta) * n_per_filter; }

    // pooled state samples for component `comp` at day t (equal weights)
    std::vector<double> pooled_state(int t, int comp) const {
        std::vector<double> out;
        out.reserve(size_t(n_particles()));
        for (const auto& b : blocks) {
            for (int i = 0; i < n_per_filter; ++i) {
                out.push_back(b.filter.state(t, i, comp));
            }
        }
        return out;
    }

    // pooled predictive observation draws at day t (requires predictive mode)
    std::vector<double> pooled_predictive(int t) const {
        std::vector<double> out;
        out.reserve(size_t(n_particles()));
        for (const auto& b : blocks) {
            for (int i = 0; i < n_per_filter; ++i) {
                out.push_back(b.filter.predictive_draw(t, i));
            }
        }
        return out;
    }
};

struct MarginalConfig {
    int n_theta = 100;
    FilterConfig filter{.n_particles = 1000};
    std::uint64_t seed = 2;
    int max_retries = 10; // redraws per block on filter collapse
};

// Algorithm: marginal smoothing sampler. Draw theta uniformly (with
// replacement) from the pooled post-burn-in PMMH samples and run one
// bootstrap filter per draw.
inline MarginalPosterior sample_marginal(const ModelSpec& model,
                                         const TimeSeriesData& data,
                                         const ChainSet& chainset,
                                         const MarginalConfig& cfg,
                                         const StepObserver& observer = {}) {
    // flatten pooled samples
    std::vector<const std::vector<double>*> pool;
    for (const auto& chain : chainset.chains) {
        for (const auto& s : chain) pool.push_back(&s);
    }
    if (pool.empty()) throw std::invalid_argument("sample_marginal: empty chainset");

    MarginalPosterior out;
    out.n_theta = cfg.n_theta;
    out.n_per_filter = cfg.filter.n_particles;
    out.T = data.length();
    out.state_dim = model.state_dim;
    out.blocks.reserve(size_t(cfg.n_theta));

    Rng pick(cfg.seed, 0xA1);
    for (int i = 0; i < cfg.n_theta; ++i) {
        bool done = false;
        for (int attempt = 0; attempt <= cfg.max_retries && !done; ++attempt) {
            size_t j = size_t(pick.uniform() * double(pool.size()));
            j = std::min(j, pool.size() - 1);
            ParamVector theta = model.param_template.with_values(*pool[j]);
            FilterConfig fcfg = cfg.filter;
            fcfg.seed = cfg.seed ^ (0x94d049bb133111ebULL * std::uint64_t(i + 1)) ^
                        std::uint64_t(attempt);
            try {
                FilterOutput f = run_filter(model, data, theta, fcfg, observer);
                out.blocks.push_back({std::move(theta), std::move(f)});
                done = true;
            } catch (const filter_collapse_error&) {
                // redraw theta
            }
        }
        if (!done) {
            throw std::runtime_error(
                "sample_marginal: filter collapsed for every retried theta draw");
        }
    }
    return out;
}

// conditional smoothing posterior at a single fixed theta, as a one-block
// mixture (convenience for comparisons)
inline MarginalPosterior conditional_posterior(const ModelSpec& model,
                                               const TimeSeriesData& data,
                                               const ParamVector& theta,
                                               const FilterConfig& cfg) {
    MarginalPosterior out;
    out.n_theta = 1;
    out.n_per_filter = cfg.n_particles;
    out.T = data.length();
    out.state_dim = model.state_dim;
    out.blocks.push_back({theta, run_filter(model, data, theta, cfg)});
    return out;
}

} // namespace rsmc

#endif

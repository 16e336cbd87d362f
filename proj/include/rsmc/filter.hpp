#ifndef RSMC_FILTER_HPP
#define RSMC_FILTER_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsmc/dist.hpp"
#include "rsmc/model.hpp"

namespace rsmc {

// All particle weights vanished: the model cannot explain the data at day t.
class filter_collapse_error : public std::runtime_error {
public:
    explicit filter_collapse_error(int t)
        : std::runtime_error("particle filter collapsed at day " + std::to_string(t)),
          day(t) {}
    int day;
};

enum class PredictiveMode { none, one_step, smoothing };

struct FilterConfig {
    int n_particles = 1000;
    int lag = -1; // < 0: model.required_lag + 2
    std::uint64_t seed = 0;
    PredictiveMode predictive = PredictiveMode::none;
    bool resample_on_missing = false;
};

// Snapshot handed to the per-step observer after resampling at day t. The
// window x_{t-L:t} holds jointly valid, equally weighted draws.
struct FilterFrame {
    const double* traj; // time-major: traj[(t*n + i)*state_dim + comp]
    int n;
    int state_dim;
    int t;
    const ParamVector* theta;

    StateHistory history(int i) const {
        return StateHistory{traj + long(i) * state_dim, state_dim,
                            long(n) * state_dim, t, 0};
    }
};

using StepObserver = std::function<void(const FilterFrame&)>;

struct FilterOutput {
    int n = 0;
    int T = 0;
    int state_dim = 1;
    int lag = 0;
    // time-major, steps 0..T (step 0 is the initial state)
    std::vector<double> trajectories;
    // per-day (1..T): log of the mean unnormalized weight; 0 on unobserved days
    std::vector<double> mean_log_weights;
    // per-day (1..T): weight ESS; N on unobserved days
    std::vector<double> particle_ess;
    // optional predictive observation draws, time-major, days 1..T
    std::vector<double> predictive;

    double state(int t, int i, int comp = 0) const {
        return trajectories[(long(t) * n + i) * state_dim + comp];
    }
    double predictive_draw(int t, int i) const {
        return predictive[long(t - 1) * n + i];
    }

    // sum over observed days of log w-bar (the Monte Carlo log-likelihood)
    double log_likelihood() const {
        double s = 0.0;
        for (double v : mean_log_weights) s += v;
        return s;
    }
};

// (sum w)^2 / sum w^2, computed in log space
inline double particle_ess(std::span<const double> log_weights) {
    double lse1 = log_sum_exp(log_weights);
    if (lse1 == kNegInf) {
        throw std::invalid_argument("particle_ess: no finite weight");
    }
    std::vector<double> doubled(log_weights.size());
    for (size_t i = 0; i < log_weights.size(); ++i) doubled[i] = 2.0 * log_weights[i];
    return std::exp(2.0 * lse1 - log_sum_exp(doubled));
}

// Draw n indices i.i.d. with probability proportional to exp(log_weights).
// Uses ordered uniform spacings, so a single pass over the CDF suffices;
// the returned indices are sorted, which does not change their joint law as
// an unordered multiset and downstream gathers treat them symmetrically.
inline std::vector<std::uint32_t> multinomial_resample(
    std::span<const double> log_weights, size_t n_draws, Rng& rng) {
    const size_t n = log_weights.size();
    const double lse = log_sum_exp(log_weights);
    if (lse == kNegInf) throw filter_collapse_error(-1);

    // ordered uniforms via exponential spacings
    std::vector<double> cuts(n_draws);
    double acc = 0.0;
    for (size_t i = 0; i < n_draws; ++i) {
        acc += rng.exponential();
        cuts[i] = acc;
    }
    acc += rng.exponential();
    for (double& c : cuts) c /= acc;

    std::vector<std::uint32_t> idx(n_draws);
    double cdf = 0.0;
    size_t j = 0;
    for (size_t i = 0; i < n && j < n_draws; ++i) {
        cdf += std::exp(log_weights[i] - lse);
        while (j < n_draws && cuts[j] <= cdf) idx[j++] = std::uint32_t(i);
    }
    while (j < n_draws) idx[j++] = std::uint32_t(n - 1); // fp round-off at the tail
    return idx;
}

inline std::vector<std::uint32_t> multinomial_resample(
    std::span<const double> log_weights, Rng& rng) {
    return multinomial_resample(log_weights, log_weights.size(), rng);
}

// Algorithm: fixed-lag bootstrap filter. Propagate all particles by the
// transition sampler, weight by the observation density, and multinomially
// resample the window x_{t-L:t} (and any predictive draws, with the same
// indices). Unobserved days propagate with weight 1 and skip resampling.
inline FilterOutput run_filter(const ModelSpec& model, const TimeSeriesData& data,
                               const ParamVector& theta, const FilterConfig& cfg,
                               const StepObserver& observer = {}) {
    const int N = cfg.n_particles;
    const int T = data.length();
    const int S = model.state_dim;
    const int L = cfg.lag >= 0 ? cfg.lag : model.required_lag + 2;
    if (N < 2) throw std::invalid_argument("run_filter: need at least 2 particles");
    if (L < model.required_lag) {
        throw std::invalid_argument("run_filter: lag below model.required_lag");
    }
    if (!theta.in_bounds()) {
        throw std::invalid_argument("run_filter: theta outside parameter bounds");
    }

    FilterOutput out;
    out.n = N;
    out.T = T;
    out.state_dim = S;
    out.lag = L;
    out.trajectories.assign(std::size_t(T + 1) * N * S, 0.0);
    out.mean_log_weights.assign(size_t(T), 0.0);
    out.particle_ess.assign(size_t(T), double(N));
    const bool want_pred = cfg.predictive != PredictiveMode::none;
    if (want_pred) out.predictive.assign(std::size_t(T) * N, 0.0);

    double* traj = out.trajectories.data();
    const long tstride = long(N) * S;

    std::vector<Rng> prng;
    prng.reserve(size_t(N));
    for (int i = 0; i < N; ++i) prng.emplace_back(cfg.seed, 0xF1, std::uint64_t(i));
    Rng rrng(cfg.seed, 0xF2);

    for (int i = 0; i < N; ++i) {
        model.initial(std::span<double>(traj + long(i) * S, size_t(S)), theta, prng[size_t(i)]);
    }

    std::vector<double> logw(std::size_t(N), 0.0);
    std::vector<double> scratch(std::size_t(N) * S);

    const double logN = std::log(double(N));

    for (int t = 1; t <= T; ++t) {
        double* col = traj + long(t) * tstride;
        for (int i = 0; i < N; ++i) {
            StateHistory h{traj + long(i) * S, S, tstride, t, 0};
            model.transition(std::span<double>(col + long(i) * S, size_t(S)), h, data,
                             theta, prng[size_t(i)]);
        }

        if (want_pred) {
            double* pcol = out.predictive.data() + long(t - 1) * N;
            for (int i = 0; i < N; ++i) {
                StateHistory h{traj + long(i) * S, S, tstride, t, 0};
                pcol[i] = model.obs_sampler(h, data, theta, prng[size_t(i)]);
            }
        }

        const bool obs = model.observed(t, data);
        bool do_resample = obs || cfg.resample_on_missing;

        if (obs) {
            bool any_finite = false;
            for (int i = 0; i < N; ++i) {
                StateHistory h{traj + long(i) * S, S, tstride, t, 0};
                logw[size_t(i)] = model.obs_logdensity(h, data, theta);
                any_finite = any_finite || (logw[size_t(i)] > kNegInf);
            }
            if (!any_finite) throw filter_collapse_error(t);
            out.mean_log_weights[size_t(t - 1)] = log_sum_exp(logw) - logN;
            out.particle_ess[size_t(t - 1)] = particle_ess(logw);
        } else {
            std::fill(logw.begin(), logw.end(), 0.0);
        }

        if (do_resample) {
            std::vector<std::uint32_t> idx = multinomial_resample(logw, rrng);
            const int first = std::max(0, t - L);
            for (int c = first; c <= t; ++c) {
                double* ccol = traj + long(c) * tstride;
                std::copy(ccol, ccol + tstride, scratch.begin());
                for (int i = 0; i < N; ++i) {
                    const double* src = scratch.data() + long(idx[size_t(i)]) * S;
                    std::copy(src, src + S, ccol + long(i) * S);
                }
            }
            if (want_pred && cfg.predictive == PredictiveMode::smoothing) {
                const int pfirst = std::max(1, t - L);
                for (int c = pfirst; c <= t; ++c) {
                    double* pcol = out.predictive.data() + long(c - 1) * N;
                    std::copy(pcol, pcol + N, scratch.begin());
                    for (int i = 0; i < N; ++i) pcol[i] = scratch[idx[size_t(i)]];
                }
            }
        }

        if (observer) {
            FilterFrame frame{traj, N, S, t, &theta};
            observer(frame);
        }
    }
    return out;
}

} // namespace rsmc

#endif

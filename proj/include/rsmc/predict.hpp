#ifndef RSMC_PREDICT_HPP
#define RSMC_PREDICT_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "rsmc/marginal.hpp"

namespace rsmc {

// data extended K days past the end: local missing, imports zero
inline TimeSeriesData extend_data(const TimeSeriesData& data, int k,
                                  bool zero_imports_from = false, int from_day = 0) {
    TimeSeriesData out = data;
    out.local_cases.resize(size_t(data.length() + k));
    out.imported_cases.resize(size_t(data.length() + k), 0);
    if (zero_imports_from) {
        for (int t = from_day; t <= data.length(); ++t) {
            if (t >= 1) out.imported_cases[size_t(t - 1)] = 0;
        }
    }
    return out;
}

// K-step forward projection of hidden states and observations
struct ProjectionResult {
    int horizon = 0;
    long n_rows = 0;
    int state_dim = 1;
    // time-major: hidden[((k-1)*n_rows + row)*state_dim + comp], k = 1..K
    std::vector<double> hidden;
    std::vector<double> observations; // same layout without state_dim

    double hidden_at(int k, long row, int comp = 0) const {
        return hidden[(long(k - 1) * n_rows + row) * state_dim + comp];
    }
    double obs_at(int k, long row) const {
        return observations[long(k - 1) * n_rows + row];
    }

    std::vector<double> pooled_hidden(int k, int comp = 0) const {
        std::vector<double> out(std::size_t(n_rows), 0.0);
        for (long r = 0; r < n_rows; ++r) out[size_t(r)] = hidden_at(k, r, comp);
        return out;
    }
    std::vector<double> pooled_obs(int k) const {
        std::vector<double> out(std::size_t(n_rows), 0.0);
        for (long r = 0; r < n_rows; ++r) out[size_t(r)] = obs_at(k, r);
        return out;
    }
};

namespace detail {

// extend one filter block K steps by the transition sampler, drawing
// observations from the observation model
inline void project_block(const ModelSpec& model, const TimeSeriesData& ext_data,
                          const ParamVector& theta, const FilterOutput& filter,
                          int K, long row0, ProjectionResult& out, Rng& rng) {
    const int N = filter.n;
    const int S = model.state_dim;
    const int T = filter.T;
    const int back = std::max(model.required_lag, 1);

    std::vector<double> buf(size_t(back + K + 1) * S);
    for (int i = 0; i < N; ++i) {
        // local time `back` corresponds to absolute time T
        for (int b = 0; b <= back; ++b) {
            const int t_abs = T - back + b;
            for (int s = 0; s < S; ++s) {
                buf[size_t(b) * S + s] = t_abs >= 0 ? filter.state(t_abs, i, s) : 0.0;
            }
        }
        for (int k = 1; k <= K; ++k) {
            StateHistory h{buf.data(), S, S, back + k, T - back};
            model.transition({buf.data() + size_t(back + k) * S, size_t(S)}, h,
                             ext_data, theta, rng);
            const double obs = model.obs_sampler(h, ext_data, theta, rng);
            const long row = row0 + i;
            for (int s = 0; s < S; ++s) {
                out.hidden[(long(k - 1) * out.n_rows + row) * S + s] =
                    buf[size_t(back + k) * S + s];
            }
            out.observations[long(k - 1) * out.n_rows + row] = obs;
        }
    }
}

} // namespace detail

// Project a marginal (or single-theta conditional) posterior K days forward.
// Parameter uncertainty is carried through by projecting each block with its
// own theta. K = 0 returns an empty projection.
inline ProjectionResult project(const ModelSpec& model, const TimeSeriesData& data,
                                const MarginalPosterior& posterior, int K,
                                std::uint64_t seed = 3) {
    ProjectionResult out;
    out.horizon = K;
    out.state_dim = model.state_dim;
    out.n_rows = posterior.n_particles();
    if (K == 0) return out;
    out.hidden.assign(size_t(out.n_rows) * K * model.state_dim, 0.0);
    out.observations.assign(size_t(out.n_rows) * K, 0.0);

    const TimeSeriesData ext = extend_data(data, K);
    long row0 = 0;
    int block_id = 0;
    for (const auto& b : posterior.blocks) {
        Rng rng(seed, 0xD1, std::uint64_t(block_id++));
        detail::project_block(model, ext, b.theta, b.filter, K, row0, out, rng);
        row0 += b.filter.n;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elimination probability
// ---------------------------------------------------------------------------

// Fraction of particles whose local incidence is zero on day t and stays
// zero for `window` projected days, conditioning on zero imports from day t.
inline double elimination_probability(const ModelSpec& model,
                                      const TimeSeriesData& data,
                                      const ParamVector& theta,
                                      const FilterFrame& frame, int window,
                                      Rng& rng, int incidence_comp = 1) {
    const int t = frame.t;
    const int N = frame.n;
    const int S = frame.state_dim;
    const int back = std::max(model.required_lag, 1);
    const TimeSeriesData ext = extend_data(data, std::max(0, t + window - data.length()),
                                           /*zero_imports_from=*/true, t);

    std::vector<double> buf(size_t(back + window + 1) * S);
    long eliminated = 0;
    for (int i = 0; i < N; ++i) {
        StateHistory cur = frame.history(i);
        if (cur.at_lag(0, incidence_comp) > 0.0) continue;
        for (int b = 0; b <= back; ++b) {
            const int t_abs = t - back + b;
            for (int s = 0; s < S; ++s) {
                buf[size_t(b) * S + s] = t_abs >= 0 ? cur.at_lag(t - t_abs, s) : 0.0;
            }
        }
        bool zero = true;
        for (int k = 1; k <= window && zero; ++k) {
            StateHistory h{buf.data(), S, S, back + k, t - back};
            model.transition({buf.data() + size_t(back + k) * S, size_t(S)}, h, ext,
                             theta, rng);
            zero = buf[size_t(back + k) * S + incidence_comp] == 0.0;
        }
        if (zero) ++eliminated;
    }
    return double(eliminated) / double(N);
}

// Per-day elimination probability series, marginalized over the chainset:
// each marginal filter run re-projects from its day-t ensemble.
inline std::vector<double> elimination_series(const ModelSpec& model,
                                              const TimeSeriesData& data,
                                              const ChainSet& chainset,
                                              const MarginalConfig& cfg,
                                              int window = 28,
                                              int incidence_comp = 1) {
    std::vector<double> sums(size_t(data.length()), 0.0);
    std::uint64_t counter = 0;
    StepObserver observer = [&](const FilterFrame& frame) {
        Rng rng(cfg.seed, 0xE1, counter++);
        sums[size_t(frame.t - 1)] += elimination_probability(
            model, data, *frame.theta, frame, window, rng, incidence_comp);
    };
    sample_marginal(model, data, chainset, cfg, observer);
    for (double& v : sums) v /= double(cfg.n_theta);
    return sums;
}

// ---------------------------------------------------------------------------
// Joint peak statistics
// ---------------------------------------------------------------------------

struct PeakSample {
    double peak;
    int day;   // 1-based day index of the peak
    Date date;
};

// Per-trajectory (max R, argmax date) over the final `window_days` days.
// Requires window_days <= lag + 1 so the rows are jointly valid draws.
// Ties break to the earliest date.
inline std::vector<PeakSample> peak_statistics(const MarginalPosterior& posterior,
                                               const TimeSeriesData& data,
                                               int window_days, int comp = 0) {
    std::vector<PeakSample> out;
    out.reserve(size_t(posterior.n_particles()));
    const int T = posterior.T;
    const int first = T - window_days + 1;
    if (first < 1) throw std::invalid_argument("peak_statistics: window exceeds series");
    for (const auto& b : posterior.blocks) {
        if (window_days > b.filter.lag + 1) {
            throw std::invalid_argument(
                "peak_statistics: window exceeds joint validity (lag + 1)");
        }
        for (int i = 0; i < b.filter.n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            int best_day = first;
            for (int t = first; t <= T; ++t) {
                const double v = b.filter.state(t, i, comp);
                if (v > best) {
                    best = v;
                    best_day = t;
                }
            }
            out.push_back({best, best_day, data.date(best_day)});
        }
    }
    return out;
}

} // namespace rsmc

#endif

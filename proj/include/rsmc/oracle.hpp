#ifndef RSMC_ORACLE_HPP
#define RSMC_ORACLE_HPP

#include <cmath>
#include <vector>

#include "rsmc/core.hpp"
#include "rsmc/dist.hpp"
#include "rsmc/eval.hpp"

namespace rsmc {

// Exact grid-based filter/smoother for model 1 (log-normal random walk on R,
// Poisson renewal observation over reported cases). Serves as a correctness
// oracle for the particle filter.

struct GridSpec {
    int m = 1000;          // grid size
    double r_min = 0.01;
    double r_max = 10.0;
    double init_r_min = 0.1; // support of the log-uniform initial distribution
    double init_r_max = 10.0;
};

struct GridPosterior {
    std::vector<double> grid;      // m R values
    std::vector<double> filtering; // T x m, row t-1 is P(R_t | y_{1:t})
    std::vector<double> smoothing; // T x m, row t-1 is P(R_t | y_{1:T})
    bool boundary_warning = false; // > 1% mass on the edge cells at some t
    int T = 0;
    int m = 0;

    std::span<const double> filtering_row(int t) const {
        return {filtering.data() + size_t(t - 1) * m, size_t(m)};
    }
    std::span<const double> smoothing_row(int t) const {
        return {smoothing.data() + size_t(t - 1) * m, size_t(m)};
    }

    double row_mean(std::span<const double> row) const {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += grid[size_t(i)] * row[size_t(i)];
        return s;
    }

    // quantile of the distribution over the grid, interpolating linearly in
    // the cumulative mass so the answer is not snapped to cell boundaries
    double row_quantile(std::span<const double> row, double p) const {
        double cum = 0.0;
        for (int i = 0; i < m; ++i) {
            const double next = cum + row[size_t(i)];
            if (next >= p) {
                const double frac =
                    row[size_t(i)] > 0.0 ? (p - cum) / row[size_t(i)] : 0.0;
                const double lo = i > 0 ? 0.5 * (grid[size_t(i - 1)] + grid[size_t(i)])
                                        : grid[0];
                const double hi = i + 1 < m
                                      ? 0.5 * (grid[size_t(i)] + grid[size_t(i + 1)])
                                      : grid[size_t(m - 1)];
                return lo + frac * (hi - lo);
            }
            cum = next;
        }
        return grid[size_t(m - 1)];
    }
};

// Forward filtering / backward smoothing on an equispaced R grid. The
// random-walk kernel is the log-normal step density discretized on the grid
// and row-normalized, so the discrete chain stays stochastic despite
// truncation. Days with no observation (or zero force of infection) skip the
// likelihood update, matching the particle filter's treatment.
inline GridPosterior grid_filter_smooth(const TimeSeriesData& data, double sigma,
                                        const DiscretePMF& serial_pmf,
                                        const GridSpec& spec = {}) {
    if (!(sigma > 0.0)) throw std::invalid_argument("grid oracle: sigma must be > 0");
    const int m = spec.m;
    const int T = data.length();

    GridPosterior out;
    out.T = T;
    out.m = m;
    out.grid.resize(size_t(m));
    const double dr = (spec.r_max - spec.r_min) / double(m - 1);
    for (int i = 0; i < m; ++i) out.grid[size_t(i)] = spec.r_min + dr * i;

    // transition kernel K[i][j] = P(r_j | r_i), row-normalized
    std::vector<double> K(size_t(m) * m);
    for (int i = 0; i < m; ++i) {
        const double log_ri = std::log(out.grid[size_t(i)]);
        double sum = 0.0;
        for (int j = 0; j < m; ++j) {
            const double rj = out.grid[size_t(j)];
            const double z = (std::log(rj) - log_ri) / sigma;
            const double dens = std::exp(-0.5 * z * z) / rj; // log-normal pdf shape
            K[size_t(i) * m + j] = dens;
            sum += dens;
        }
        for (int j = 0; j < m; ++j) K[size_t(i) * m + j] /= sum;
    }

    // initial distribution: log R_0 uniform on [log init_r_min, log init_r_max]
    std::vector<double> prev(size_t(m), 0.0);
    {
        double sum = 0.0;
        for (int i = 0; i < m; ++i) {
            const double r = out.grid[size_t(i)];
            if (r >= spec.init_r_min && r <= spec.init_r_max) {
                prev[size_t(i)] = 1.0 / r;
                sum += prev[size_t(i)];
            }
        }
        for (double& v : prev) v /= sum;
    }

    out.filtering.assign(size_t(T) * m, 0.0);
    std::vector<double> predicted(size_t(T) * m, 0.0);

    std::vector<double> history; // observed totals, for the force of infection
    history.reserve(size_t(T));

    for (int t = 1; t <= T; ++t) {
        double* pred = predicted.data() + size_t(t - 1) * m;
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += prev[size_t(i)] * K[size_t(i) * m + j];
            pred[j] = s;
        }

        const double lambda = force_of_infection(history, serial_pmf);
        double* filt = out.filtering.data() + size_t(t - 1) * m;
        if (!data.missing(t) && lambda > 0.0) {
            const long y = *data.local_cases[size_t(t - 1)];
            double maxlog = kNegInf;
            std::vector<double> logpost(std::size_t(m), 0.0);
            for (int j = 0; j < m; ++j) {
                logpost[size_t(j)] = std::log(pred[j]) +
                                     poisson_logpmf(y, out.grid[size_t(j)] * lambda);
                maxlog = std::max(maxlog, logpost[size_t(j)]);
            }
            double sum = 0.0;
            for (int j = 0; j < m; ++j) {
                filt[j] = std::exp(logpost[size_t(j)] - maxlog);
                sum += filt[j];
            }
            for (int j = 0; j < m; ++j) filt[j] /= sum;
        } else {
            std::copy(pred, pred + m, filt);
        }

        if (filt[0] + filt[m - 1] > 0.01) out.boundary_warning = true;
        std::copy(filt, filt + m, prev.begin());
        history.push_back(data.total(t));
    }

    // backward smoothing
    out.smoothing.assign(size_t(T) * m, 0.0);
    std::copy(out.filtering.end() - m, out.filtering.end(), out.smoothing.end() - m);
    for (int t = T - 1; t >= 1; --t) {
        const double* filt = out.filtering.data() + size_t(t - 1) * m;
        const double* pred_next = predicted.data() + size_t(t) * m;
        const double* smooth_next = out.smoothing.data() + size_t(t) * m;
        double* smooth = out.smoothing.data() + size_t(t - 1) * m;
        std::vector<double> ratio(std::size_t(m), 0.0);
        for (int j = 0; j < m; ++j) {
            ratio[size_t(j)] = pred_next[j] > 0.0 ? smooth_next[j] / pred_next[j] : 0.0;
        }
        double sum = 0.0;
        for (int i = 0; i < m; ++i) {
            double s = 0.0;
            for (int j = 0; j < m; ++j) s += K[size_t(i) * m + j] * ratio[size_t(j)];
            smooth[i] = filt[i] * s;
            sum += smooth[i];
        }
        for (int i = 0; i < m; ++i) smooth[i] /= sum; // guard fp drift
    }
    return out;
}

} // namespace rsmc

#endif

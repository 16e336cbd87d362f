#ifndef RSMC_MODEL_HPP
#define RSMC_MODEL_HPP

#include <functional>
#include <span>

#include "rsmc/core.hpp"
#include "rsmc/rng.hpp"

namespace rsmc {

// Read-only view of one particle's state history. Storage is time-major:
// base points at the particle's time-0 slot and consecutive time steps are
// time_stride doubles apart. Lags reaching before time 0 read as zero.
struct StateHistory {
    const double* base;   // slot of this particle at local time 0
    int state_dim;
    long time_stride;     // doubles between consecutive time steps
    int t_local;          // local index of the current time step
    int t_offset = 0;     // absolute time = t_local + t_offset

    // state component `comp` at `lag` steps before the current time
    double at_lag(int lag, int comp) const {
        const int s = t_local - lag;
        if (s < 0) return 0.0;
        return base[long(s) * time_stride + comp];
    }

    int t() const { return t_local + t_offset; }
};

// Prior over the parameter vector. logpdf may be improper up to a constant;
// -inf marks out-of-support points.
struct ParamPrior {
    std::function<double(std::span<const double>)> logpdf;
    std::function<void(std::span<double>, Rng&)> sample;
};

// A hidden-state model: everything the filter, PMMH, simulator, and
// projection machinery need to know.
//
// transition writes the new state for absolute time t given the particle's
// history (h.t() == t, h.at_lag(1,.) is the previous state). observed says
// whether day t carries a weightable observation; on unobserved days the
// filter skips weighting and resampling. obs_logdensity is only called on
// observed days, with the new state already written (h.at_lag(0,.)).
struct ModelSpec {
    int state_dim = 1;
    int required_lag = 1;

    std::function<void(std::span<double> out, const StateHistory& h,
                       const TimeSeriesData& data, const ParamVector& theta,
                       Rng& rng)>
        transition;

    std::function<bool(int t, const TimeSeriesData& data)> observed;

    std::function<double(const StateHistory& h, const TimeSeriesData& data,
                         const ParamVector& theta)>
        obs_logdensity;

    std::function<double(const StateHistory& h, const TimeSeriesData& data,
                         const ParamVector& theta, Rng& rng)>
        obs_sampler;

    std::function<void(std::span<double> out, const ParamVector& theta, Rng& rng)>
        initial;

    ParamPrior prior;
    ParamVector param_template; // names, bounds, and default values
};

} // namespace rsmc

#endif

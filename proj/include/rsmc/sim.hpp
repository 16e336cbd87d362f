#ifndef RSMC_SIM_HPP
#define RSMC_SIM_HPP

#include <cmath>
#include <vector>

#include "rsmc/model.hpp"

namespace rsmc {

struct SyntheticEpidemic {
    std::vector<double> true_states; // (T+1) x state_dim, step 0 is initial
    TimeSeriesData observations;
    ParamVector theta_true;
    std::uint64_t seed = 0;
    bool extinct_tail = false; // all-zero local cases over the final week

    int state_dim = 1;

    double state(int t, int comp = 0) const {
        return true_states[size_t(t) * size_t(state_dim) + size_t(comp)];
    }
};

// Forward-simulate a model: draw the initial state, iterate the transition
// sampler, and draw observations from the observation sampler. Identical
// (model, theta, seed) inputs reproduce the output exactly.
inline SyntheticEpidemic simulate(const ModelSpec& model, const ParamVector& theta,
                                  int T, Date start_date, std::uint64_t seed,
                                  const std::vector<long>& imports = {}) {
    if (T < 1) throw std::invalid_argument("simulate: T must be >= 1");
    const int S = model.state_dim;

    SyntheticEpidemic out;
    out.theta_true = theta;
    out.seed = seed;
    out.state_dim = S;
    out.true_states.assign(size_t(T + 1) * S, 0.0);

    TimeSeriesData data;
    data.start_date = start_date;
    data.local_cases.assign(size_t(T), std::nullopt);
    data.imported_cases = imports.empty() ? std::vector<long>(size_t(T), 0) : imports;
    if (int(data.imported_cases.size()) != T) {
        throw std::invalid_argument("simulate: imports length must equal T");
    }

    Rng rng(seed, 0x51);
    double* traj = out.true_states.data();
    model.initial({traj, size_t(S)}, theta, rng);
    for (int t = 1; t <= T; ++t) {
        StateHistory h{traj, S, S, t, 0};
        model.transition({traj + size_t(t) * S, size_t(S)}, h, data, theta, rng);
        const double y = model.obs_sampler(h, data, theta, rng);
        if (std::isfinite(y)) {
            data.local_cases[size_t(t - 1)] = long(std::llround(y));
        }
    }
    out.observations = std::move(data);

    const int tail = std::min(7, T);
    out.extinct_tail = true;
    for (int t = T - tail + 1; t <= T; ++t) {
        if (out.observations.local_or_zero(t) > 0.0) out.extinct_tail = false;
    }
    return out;
}

} // namespace rsmc

#endif

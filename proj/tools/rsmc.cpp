// Command-line driver: simulate | pmmh | fit | project | evaluate.
// Exit codes: 0 success, 2 PMMH did not converge (partial outputs kept),
// 3 bad input data, 1 anything else.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsmc/eval.hpp"
#include "rsmc/io.hpp"
#include "rsmc/marginal.hpp"
#include "rsmc/models.hpp"
#include "rsmc/oracle.hpp"
#include "rsmc/pmmh.hpp"
#include "rsmc/predict.hpp"
#include "rsmc/sim.hpp"

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t derive_seed(std::uint64_t s) { return rsmc::splitmix64(s); }

struct AppConfig {
    std::string model = "renewal";  // renewal | incidence | delay
    std::string variant = "naive";  // delay model: day_of_week | aggregated | naive
    double si_mean = 6.5, si_sd = 4.2;
    int si_umax = 0; // 0 = auto (0.999 cumulative mass)
    double inc_mean = 5.5, inc_sd = 2.3;
    int inc_umax = 21;
    rsmc::PmmhConfig pmmh;
    rsmc::MarginalConfig marginal;
    int horizon = 0;
    bool elimination = false;
    int elimination_window = 28;
    int sim_days = 100;
    std::string sim_start = "2020-02-01";
    double sim_seed_cases = 10.0;
    double sim_r0_min = 0.1, sim_r0_max = 10.0;
    std::map<std::string, double> sim_theta;
    json echo; // raw config for the manifest
};

AppConfig load_config(const std::string& path) {
    AppConfig c;
    if (path.empty()) {
        c.echo = json::object();
        return c;
    }
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j = json::parse(in);
    c.echo = j;

    c.model = j.value("model", c.model);
    c.variant = j.value("variant", c.variant);
    if (j.contains("serial_interval")) {
        const auto& s = j["serial_interval"];
        c.si_mean = s.value("mean", c.si_mean);
        c.si_sd = s.value("sd", c.si_sd);
        c.si_umax = s.value("u_max", c.si_umax);
    }
    if (j.contains("incubation")) {
        const auto& s = j["incubation"];
        c.inc_mean = s.value("mean", c.inc_mean);
        c.inc_sd = s.value("sd", c.inc_sd);
        c.inc_umax = s.value("u_max", c.inc_umax);
    }
    if (j.contains("pmmh")) {
        const auto& p = j["pmmh"];
        c.pmmh.n_chains = p.value("n_chains", c.pmmh.n_chains);
        c.pmmh.filter.n_particles = p.value("n_particles", c.pmmh.filter.n_particles);
        c.pmmh.chunk = p.value("chunk", c.pmmh.chunk);
        c.pmmh.rhat_threshold = p.value("rhat_threshold", c.pmmh.rhat_threshold);
        c.pmmh.min_ess = p.value("min_ess", c.pmmh.min_ess);
        c.pmmh.max_adapt_iterations =
            p.value("max_adapt_iterations", c.pmmh.max_adapt_iterations);
        c.pmmh.max_primary_iterations =
            p.value("max_primary_iterations", c.pmmh.max_primary_iterations);
        if (c.pmmh.rhat_threshold <= 0.0 || c.pmmh.min_ess <= 0.0) {
            throw std::runtime_error("config: pmmh thresholds must be positive");
        }
    }
    if (j.contains("marginal")) {
        const auto& m = j["marginal"];
        c.marginal.n_theta = m.value("n_theta", c.marginal.n_theta);
        c.marginal.filter.n_particles =
            m.value("n_particles", c.marginal.filter.n_particles);
        c.marginal.filter.lag = m.value("lag", c.marginal.filter.lag);
    }
    if (j.contains("projection")) {
        const auto& p = j["projection"];
        c.horizon = p.value("horizon", c.horizon);
        c.elimination = p.value("elimination", c.elimination);
        c.elimination_window = p.value("elimination_window", c.elimination_window);
    }
    if (j.contains("simulate")) {
        const auto& s = j["simulate"];
        c.sim_days = s.value("days", c.sim_days);
        c.sim_start = s.value("start_date", c.sim_start);
        c.sim_seed_cases = s.value("seed_cases", c.sim_seed_cases);
        c.sim_r0_min = s.value("init_r_min", c.sim_r0_min);
        c.sim_r0_max = s.value("init_r_max", c.sim_r0_max);
        if (s.contains("theta")) {
            for (auto it = s["theta"].begin(); it != s["theta"].end(); ++it) {
                c.sim_theta[it.key()] = it.value().get<double>();
            }
        }
    }
    return c;
}

rsmc::DiscretePMF make_pmf(double mean, double sd, int u_max) {
    return u_max > 0 ? rsmc::discretize_gamma(mean, sd, u_max)
                     : rsmc::discretize_gamma(mean, sd);
}

// Build the model spec. For fitting, hidden incidence over the first u_max
// days is pinned to the observed local cases; for simulation it is pinned to
// a constant seed count.
rsmc::ModelSpec build_model(const AppConfig& c, const rsmc::TimeSeriesData* data,
                            bool simulating) {
    const rsmc::DiscretePMF gen = make_pmf(c.si_mean, c.si_sd, c.si_umax);
    std::vector<double> seed;
    if (simulating) {
        seed.assign(size_t(gen.u_max()), c.sim_seed_cases);
    } else if (data) {
        seed = rsmc::seed_from_data(*data, gen.u_max());
    }

    if (c.model == "renewal") {
        rsmc::Model1Options opt;
        opt.serial_interval = gen;
        if (simulating) {
            opt.seed_obs = seed;
            opt.init_r_min = c.sim_r0_min;
            opt.init_r_max = c.sim_r0_max;
        }
        return rsmc::model1_spec(opt);
    }
    if (c.model == "incidence") {
        rsmc::Model2Options opt;
        opt.generation_time = gen;
        opt.seed_incidence = seed;
        if (simulating) {
            opt.init_r_min = c.sim_r0_min;
            opt.init_r_max = c.sim_r0_max;
        }
        return rsmc::model2_spec(opt);
    }
    if (c.model == "delay") {
        rsmc::Model3Options opt;
        opt.generation_time = gen;
        opt.incubation = make_pmf(c.inc_mean, c.inc_sd, c.inc_umax);
        opt.seed_incidence = seed;
        if (simulating) {
            opt.init_r_min = c.sim_r0_min;
            opt.init_r_max = c.sim_r0_max;
        }
        if (c.variant == "day_of_week") {
            opt.variant = rsmc::Model3Variant::day_of_week;
        } else if (c.variant == "aggregated") {
            opt.variant = rsmc::Model3Variant::aggregated;
        } else if (c.variant == "naive") {
            opt.variant = rsmc::Model3Variant::naive;
        } else {
            throw std::runtime_error("config: unknown variant '" + c.variant + "'");
        }
        return rsmc::model3_spec(opt);
    }
    throw std::runtime_error("config: unknown model '" + c.model +
                             "' (expected renewal, incidence, or delay)");
}

std::vector<std::string> component_names(const AppConfig& c) {
    if (c.model == "renewal") return {"R"};
    return {"R", "incidence"};
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write: " + p.string());
    out << std::setprecision(17);
    return out;
}

void write_chains(const std::filesystem::path& dir, const rsmc::ChainSet& cs) {
    auto out = open_out(dir / "chains.csv");
    out << "chain,iteration";
    for (const auto& n : cs.param_names) out << ',' << n;
    out << ",log_likelihood\n";
    for (size_t c = 0; c < cs.chains.size(); ++c) {
        for (size_t i = 0; i < cs.chains[c].size(); ++i) {
            out << c << ',' << i;
            for (double v : cs.chains[c][i]) out << ',' << v;
            out << ',' << cs.loglik[c][i] << '\n';
        }
    }

    auto diag = open_out(dir / "diagnostics.csv");
    diag << "parameter,posterior_mean,rhat,ess\n";
    for (int p = 0; p < cs.n_params(); ++p) {
        diag << cs.param_names[size_t(p)] << ',' << cs.posterior_mean(p) << ','
             << cs.rhat[size_t(p)] << ',' << cs.ess[size_t(p)] << '\n';
    }
}

void summary_row(std::ofstream& out, const std::string& date,
                 const std::string& component, std::vector<double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    out << date << ',' << component << ',' << mean;
    for (double p : {0.025, 0.25, 0.5, 0.75, 0.975}) {
        out << ',' << rsmc::quantile(v, p);
    }
    out << '\n';
}

void write_fit(const std::filesystem::path& dir, const AppConfig& c,
               const rsmc::TimeSeriesData& data,
               const rsmc::MarginalPosterior& post) {
    auto out = open_out(dir / "fit.csv");
    out << "date,component,mean,q2.5,q25,q50,q75,q97.5\n";
    const auto comps = component_names(c);
    for (int t = 1; t <= data.length(); ++t) {
        const std::string d = rsmc::format_date(data.date(t));
        for (size_t s = 0; s < comps.size(); ++s) {
            summary_row(out, d, comps[s], post.pooled_state(t, int(s)));
        }
        std::vector<double> pred;
        for (double v : post.pooled_predictive(t)) {
            if (std::isfinite(v)) pred.push_back(v);
        }
        if (pred.size() >= 2) summary_row(out, d, "reported", std::move(pred));
    }
}

// marginal posterior with predictive draws; shared by fit/project/evaluate
rsmc::MarginalPosterior run_marginal(const rsmc::ModelSpec& model,
                                     const rsmc::TimeSeriesData& data,
                                     const rsmc::ChainSet& cs, AppConfig& c,
                                     std::uint64_t seed) {
    c.marginal.seed = derive_seed(seed ^ 0x6d6172676e6c0a01ULL);
    c.marginal.filter.predictive = rsmc::PredictiveMode::smoothing;
    return rsmc::sample_marginal(model, data, cs, c.marginal);
}

int run(const std::string& command, const std::string& config_path,
        const std::string& data_path, const std::string& out_dir,
        std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    AppConfig cfg = load_config(config_path);
    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    json manifest;
    manifest["command"] = command;
    manifest["seed"] = seed;
    manifest["config"] = cfg.echo;
    manifest["data"] = data_path;
    manifest["version"] = kVersion;
    manifest["compiler"] = __VERSION__;
    int exit_code = 0;

    if (command == "simulate") {
        rsmc::ModelSpec model = build_model(cfg, nullptr, /*simulating=*/true);
        std::vector<double> vals = model.param_template.values;
        for (int p = 0; p < model.param_template.dim(); ++p) {
            auto it = cfg.sim_theta.find(model.param_template.names[size_t(p)]);
            if (it != cfg.sim_theta.end()) vals[size_t(p)] = it->second;
        }
        rsmc::ParamVector theta = model.param_template.with_values(vals);
        rsmc::SyntheticEpidemic sim = rsmc::simulate(
            model, theta, cfg.sim_days, rsmc::parse_date(cfg.sim_start), seed);
        rsmc::write_timeseries((dir / "synthetic.csv").string(), sim.observations);

        auto truth = open_out(dir / "truth.csv");
        const auto comps = component_names(cfg);
        truth << "date";
        for (const auto& n : comps) truth << ",true_" << n;
        truth << '\n';
        for (int t = 1; t <= cfg.sim_days; ++t) {
            truth << rsmc::format_date(sim.observations.date(t));
            for (size_t s = 0; s < comps.size(); ++s) {
                truth << ',' << sim.state(t, int(s));
            }
            truth << '\n';
        }
        json jt;
        for (int p = 0; p < theta.dim(); ++p) jt[theta.names[size_t(p)]] = theta[p];
        manifest["theta_true"] = jt;
        manifest["extinct_tail"] = sim.extinct_tail;
    } else {
        if (data_path.empty()) throw rsmc::data_error("--data is required");
        rsmc::TimeSeriesData data = rsmc::ingest(data_path);
        rsmc::ModelSpec model = build_model(cfg, &data, /*simulating=*/false);
        cfg.pmmh.seed = seed;
        rsmc::ChainSet cs = rsmc::run_pmmh(model, data, cfg.pmmh);
        write_chains(dir, cs);
        manifest["converged"] = cs.converged;
        manifest["pmmh_iterations"] = cs.total_iterations;
        manifest["acceptance_rate"] = cs.acceptance_rate;
        if (!cs.converged) {
            std::cerr << "warning: PMMH did not reach the R-hat/ESS thresholds; "
                         "outputs are based on the samples collected so far\n";
            exit_code = 2;
        }

        if (command == "fit" || command == "project" || command == "evaluate") {
            rsmc::MarginalPosterior post = run_marginal(model, data, cs, cfg, seed);
            write_fit(dir, cfg, data, post);

            if (command == "project" && cfg.horizon > 0) {
                rsmc::ProjectionResult proj = rsmc::project(
                    model, data, post, cfg.horizon,
                    derive_seed(seed ^ 0x70726f6a65637401ULL));
                auto out = open_out(dir / "projection.csv");
                out << "date,component,mean,q2.5,q25,q50,q75,q97.5\n";
                const auto comps = component_names(cfg);
                for (int k = 1; k <= cfg.horizon; ++k) {
                    const std::string d = rsmc::format_date(
                        data.date(data.length() + k));
                    for (size_t s = 0; s < comps.size(); ++s) {
                        summary_row(out, d, comps[s], proj.pooled_hidden(k, int(s)));
                    }
                    std::vector<double> obs;
                    for (double v : proj.pooled_obs(k)) {
                        if (std::isfinite(v)) obs.push_back(v);
                    }
                    if (obs.size() >= 2) summary_row(out, d, "reported", std::move(obs));
                }
            }
            if (command == "project" && cfg.elimination) {
                if (cfg.model == "renewal") {
                    throw std::runtime_error(
                        "elimination requires a model with hidden incidence");
                }
                std::vector<double> p = rsmc::elimination_series(
                    model, data, cs, cfg.marginal, cfg.elimination_window);
                auto out = open_out(dir / "elimination.csv");
                out << "date,p_elimination\n";
                for (int t = 1; t <= data.length(); ++t) {
                    out << rsmc::format_date(data.date(t)) << ','
                        << p[size_t(t - 1)] << '\n';
                }
            }
            if (command == "evaluate") {
                std::vector<std::vector<double>> samples;
                std::vector<std::optional<double>> obs;
                for (int t = 1; t <= data.length(); ++t) {
                    samples.push_back(post.pooled_predictive(t));
                    obs.push_back(data.missing(t)
                                      ? std::nullopt
                                      : std::optional<double>(data.local_or_zero(t)));
                }
                rsmc::ScoreReport rep = rsmc::score_predictive(samples, obs);
                auto out = open_out(dir / "scores.csv");
                out << "metric,value\n";
                out << "rmse," << rep.rmse << '\n';
                out << "crps," << rep.crps << '\n';
                for (const auto& [level, cov] : rep.coverage) {
                    char key[32];
                    std::snprintf(key, sizeof key, "coverage_%g", level);
                    out << key << ',' << cov << '\n';
                }
                out << "n_obs," << rep.n_obs << '\n';
            }
        }
    }

    const auto t1 = std::chrono::steady_clock::now();
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(t1 - t0).count();
    std::ofstream mf(dir / "manifest.json");
    mf << manifest.dump(2) << '\n';
    return exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential Monte Carlo inference for renewal-equation "
                 "epidemic models"};
    std::string command, config_path, data_path, out_dir = ".";
    std::uint64_t seed = 1;
    app.add_option("--command", command, "fit | pmmh | project | evaluate | simulate")
        ->required();
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--data", data_path, "input case-count CSV");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "RNG seed");
    CLI11_PARSE(app, argc, argv);

    static const std::vector<std::string> known = {"fit", "pmmh", "project",
                                                   "evaluate", "simulate"};
    if (std::find(known.begin(), known.end(), command) == known.end()) {
        std::cerr << "unknown command: " << command << '\n';
        return 1;
    }

    try {
        return run(command, config_path, data_path, out_dir, seed);
    } catch (const rsmc::data_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wsindy/bias.hpp"
#include "wsindy/errors.hpp"
#include "wsindy/filtering.hpp"
#include "wsindy/harness.hpp"
#include "wsindy/simulate.hpp"

using namespace wsindy;

namespace {

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

SystemKind system_of(const Dataset& data, const std::string& override_name) {
    if (!override_name.empty()) return parse_system(override_name);
    const auto it = data.metadata.find("system");
    if (it == data.metadata.end())
        throw std::invalid_argument("dataset has no 'system' metadata; pass --system to choose the library");
    return parse_system(it->second);
}

void print_model(const DiscoveryResult& res) {
    for (Eigen::Index e = 0; e < res.weights.cols(); ++e) {
        std::printf("equation %ld (lambda_hat %.6g):\n", static_cast<long>(e + 1), res.models[e].lambda_hat);
        for (Eigen::Index i = 0; i < res.weights.rows(); ++i)
            if (res.weights(i, e) != 0.0)
                std::printf("  %+.10g  %s\n", res.weights(i, e),
                            res.columns[static_cast<std::size_t>(i)].label().c_str());
    }
}

struct SimulateArgs {
    std::string system, out, profile;
    std::size_t time_points = 0, space_points = 0;
    double t_final = 0.0, burn_in = -1.0, scale = 1.0, offset = 0.0;
    int substeps = 0;
    std::vector<double> initial_state;
    double noise_ratio = 0.0, sigma = 0.0;
    std::string distribution = "gaussian";
    std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateArgs& a) {
    SimConfig cfg = default_sim_config(parse_system(a.system));
    if (a.time_points) cfg.time_points = a.time_points;
    if (a.space_points) cfg.space_points = a.space_points;
    if (a.t_final > 0.0) cfg.t_final = a.t_final;
    if (a.substeps) cfg.substeps = a.substeps;
    if (a.burn_in >= 0.0) cfg.burn_in = a.burn_in;
    if (!a.initial_state.empty()) cfg.initial_state = a.initial_state;
    if (!a.profile.empty()) cfg.initial_profile = a.profile;
    cfg.profile_scale = a.scale;
    cfg.profile_offset = a.offset;
    Dataset data = simulate(cfg);
    if (a.noise_ratio > 0.0 && a.sigma > 0.0) throw std::invalid_argument("give either --noise-ratio or --sigma");
    if (a.noise_ratio > 0.0 || a.sigma > 0.0) {
        const NoiseDistribution dist =
            a.distribution == "uniform" ? NoiseDistribution::uniform : NoiseDistribution::gaussian;
        if (a.distribution != "uniform" && a.distribution != "gaussian")
            throw std::invalid_argument("--distribution must be gaussian or uniform");
        data = a.noise_ratio > 0.0 ? add_noise(data, {dist, NoiseLevelMode::noise_ratio, a.noise_ratio, a.seed})
                                   : add_noise(data, {dist, NoiseLevelMode::absolute_sigma, a.sigma, a.seed});
    }
    write_dataset(data, a.out);
    std::printf("wrote %s: %zu points x %zu components, stdev %.6g, noise sigma %.6g\n", a.out.c_str(),
                data.num_points(), data.state_dim, stdev_all(data), data.sigma);
    return 0;
}

struct DiscoverArgs {
    std::string input, system, mode = "grid", filter = "off", loss_trace, system_csv;
    std::vector<double> support_fraction;
    std::size_t query_budget = 0;
    double tau_star = 0.01;
    unsigned threads = 0;
};

int cmd_discover(const DiscoverArgs& a) {
    const Dataset data = read_dataset(a.input);
    const SystemPreset preset = system_preset(system_of(data, a.system));
    DiscoveryOptions opts = discovery_options(preset);
    if (!a.support_fraction.empty()) opts.support_fraction = a.support_fraction;
    if (a.query_budget) opts.query_budget = a.query_budget;
    if (a.mode != "grid" && a.mode != "oneshot") throw std::invalid_argument("--mode must be grid or oneshot");
    opts.mstls.mode = a.mode == "oneshot" ? MstlsMode::oneshot : MstlsMode::grid;
    opts.filter = parse_filter_mode(a.filter);
    opts.tau_star = a.tau_star;
    opts.threads = a.threads;
    const DiscoveryResult res = run_discovery(data, opts);

    std::printf("system %s, %zu library columns, m = %zu, K = %zu, residual %.3e%s\n", to_string(preset.system),
                res.columns.size(), res.m, res.K, res.residual, res.rank_deficient ? ", rank deficient" : "");
    if (!res.filter_widths.empty()) {
        std::printf("filter widths");
        for (int w : res.filter_widths) std::printf(" %d", w);
        std::printf(" (sigma_est %.6g)\n", res.sigma_est);
    }
    print_model(res);
    const Metrics m = metrics(res.weights, preset.true_weights(res.columns));
    std::printf("against the reference model: support_exact %d, support_subset %d, e_inf %.6g\n", m.support_exact,
                m.support_subset, m.e_inf);

    if (!a.loss_trace.empty())
        for (std::size_t e = 0; e < res.models.size(); ++e) {
            const std::string path =
                res.models.size() == 1 ? a.loss_trace : a.loss_trace + "." + std::to_string(e + 1) + ".csv";
            write_loss_trace_csv(res.models[e], path);
        }
    if (!a.system_csv.empty()) {
        const auto queries = choose_query_points(data.grid, res.radii, opts.query_budget);
        write_system_csv(assemble(data, opts.library, res.radii, queries, opts.threads), a.system_csv);
    }
    return 0;
}

struct ExperimentArgs {
    std::string config, results = "results.csv", aggregates = "aggregate.csv", clean;
    unsigned threads = 0;
};

int cmd_experiment(const ExperimentArgs& a) {
    ExperimentConfig cfg = load_experiment_config(a.config);
    if (a.threads) cfg.threads = a.threads;
    std::optional<Dataset> clean;
    if (!a.clean.empty()) clean = read_dataset(a.clean);
    const ExperimentResult r = run_experiment(cfg, clean ? &*clean : nullptr);
    auto out = open_output(a.results);
    write_results_csv(r.rows, out);
    auto agg = open_output(a.aggregates);
    write_aggregate_csv(r.aggregates, agg);
    std::printf("%-10s %-8s %8s %8s %8s %12s %8s\n", "sigma", "m", "P_exact", "P_subset", "n_exact", "E_inf_exact",
                "trials");
    for (const auto& c : r.aggregates)
        std::printf("%-10.4g %-8zu %8.3f %8.3f %8zu %12.4g %8zu\n", c.sigma, c.m, c.p_exact, c.p_subset, c.n_exact,
                    c.mean_e_inf_exact, c.n_trials);
    std::size_t failed = 0;
    for (const auto& row : r.rows)
        if (row.status.rfind("failed", 0) == 0) ++failed;
    if (failed) std::printf("%zu trial(s) failed; see the status column\n", failed);
    return 0;
}

struct BiasArgs {
    std::string system, distribution = "gaussian", csv, clean;
    double sigma = 0.1;
};

int cmd_bias(const BiasArgs& a) {
    const SystemPreset preset = system_preset(parse_system(a.system));
    const ColumnIndex idx(preset.library);
    if (a.distribution != "gaussian" && a.distribution != "uniform")
        throw std::invalid_argument("--distribution must be gaussian or uniform");
    const NoiseLaw law{a.distribution == "uniform" ? NoiseLaw::Kind::uniform : NoiseLaw::Kind::gaussian, {}};
    const MomentMatrix mm = build_moment_matrix(idx, law, a.sigma);
    const Eigen::MatrixXd W = preset.true_weights(idx);

    std::optional<WeakSystem> clean_system;
    if (!a.clean.empty()) {
        const Dataset clean = read_dataset(a.clean);
        const auto radii = radii_for_fraction(clean.grid, preset.support_fraction);
        clean_system =
            assemble(clean, preset.library, radii, choose_query_points(clean.grid, radii, preset.query_budget));
    }

    std::optional<std::ofstream> csv;
    if (!a.csv.empty()) {
        csv = open_output(a.csv);
        *csv << "equation,column,label,w_true,w_continuum,generated\n";
        csv->precision(17);
    }
    std::printf("system %s, %s noise, sigma %.6g, %zu library columns\n", to_string(preset.system),
                a.distribution.c_str(), a.sigma, idx.size());
    for (Eigen::Index e = 0; e < W.cols(); ++e) {
        const Eigen::VectorXd w = W.col(e);
        const Eigen::VectorXd bar = predict_continuum_coefficients(w, mm);
        const Eigen::VectorXd gen = bar - w;
        std::printf("\nequation %ld\n  %-22s %14s %14s\n", static_cast<long>(e + 1), "term", "true", "continuum");
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const std::string label = idx[static_cast<std::size_t>(i)].label();
            if (w[i] != 0.0 || std::abs(gen[i]) > 1e-14)
                std::printf("  %-22s %14.8g %14.8g\n", label.c_str(), w[i], bar[i]);
            if (csv) *csv << e + 1 << ',' << i << ',' << label << ',' << w[i] << ',' << bar[i] << ',' << gen[i] << '\n';
        }
        const Support s_true = support_of(w);
        std::printf("  delta_1 (continuum threshold gap) %.6g\n", threshold_feasibility(bar, s_true));
        const CriticalNoiseBounds b = critical_noise_bounds(w, idx);
        if (b.unconditional)
            std::printf("  sigma_c: unbounded (no admissible spurious term)\n");
        else
            std::printf("  sigma_c bracket [%.6g, %.6g] (degree %d)\n", std::sqrt(b.lower_sq), std::sqrt(b.upper_sq),
                        b.degree);
        if (const auto flip = exact_flip_sigma(w, idx)) std::printf("  exact flip sigma (pattern) %.6g\n", *flip);
        if (clean_system) {
            const Eigen::VectorXd b_star = clean_system->b.col(e);
            std::printf("  mu* from clean data %.6g\n", mu_star(clean_system->G, b_star, s_true, idx.size()));
        }
    }
    return 0;
}

int cmd_estimate_noise(const std::string& input) {
    const Dataset data = read_dataset(input);
    const NoiseEstimate est = estimate_sigma(data);
    std::printf("sigma_est %.8g (%s)\n", est.sigma_est, est.method.c_str());
    for (std::size_t q = 0; q < est.per_axis.size(); ++q) std::printf("  axis %zu: %.8g\n", q, est.per_axis[q]);
    if (data.sigma > 0.0) std::printf("recorded noise sigma %.8g\n", data.sigma);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weak-form sparse identification of dynamics: simulation, discovery and noise studies"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Simulate a built-in system and write a dataset file");
    s->add_option("--system", sim.system, "lorenz | cubic_oscillator | burgers_nl | hyper_ks")->required();
    s->add_option("-o,--out", sim.out, "Output dataset path")->required();
    s->add_option("--time-points", sim.time_points, "Number of recorded time samples");
    s->add_option("--space-points", sim.space_points, "Spatial grid points (PDEs)");
    s->add_option("--t-final", sim.t_final, "Final time");
    s->add_option("--substeps", sim.substeps, "Integrator substeps per output interval (PDEs)");
    s->add_option("--burn-in", sim.burn_in, "Simulated time discarded before recording");
    s->add_option("--initial-state", sim.initial_state, "ODE initial state")->delimiter(',');
    s->add_option("--initial-profile", sim.profile, "PDE initial profile name");
    s->add_option("--profile-scale", sim.scale, "Multiplier on the initial profile");
    s->add_option("--profile-offset", sim.offset, "Constant added to the initial profile");
    s->add_option("--noise-ratio", sim.noise_ratio, "Add noise with this ratio to the data spread");
    s->add_option("--sigma", sim.sigma, "Add noise with this standard deviation");
    s->add_option("--distribution", sim.distribution, "gaussian | uniform");
    s->add_option("--seed", sim.seed, "Noise seed");

    DiscoverArgs disc;
    auto* d = app.add_subcommand("discover", "Identify a model from a dataset file");
    d->add_option("-i,--input", disc.input, "Dataset path")->required();
    d->add_option("--system", disc.system, "Library preset; defaults to the dataset's system");
    d->add_option("--support-fraction", disc.support_fraction, "Test function support per axis")->delimiter(',');
    d->add_option("--query-budget", disc.query_budget, "Maximum number of query points");
    d->add_option("--mode", disc.mode, "grid | oneshot");
    d->add_option("--filter", disc.filter, "off | heuristic | adaptive");
    d->add_option("--tau-star", disc.tau_star, "Bias tolerance for the filter width heuristic");
    d->add_option("--threads", disc.threads, "Assembly threads (0 = hardware)");
    d->add_option("--loss-trace", disc.loss_trace, "Write the threshold search trace as CSV");
    d->add_option("--system-csv", disc.system_csv, "Write the weak linear system as CSV");

    ExperimentArgs exp;
    auto* e = app.add_subcommand("experiment", "Run a Monte Carlo sweep from a key=value config file");
    e->add_option("-c,--config", exp.config, "Config file")->required();
    e->add_option("--results", exp.results, "Per-trial CSV path");
    e->add_option("--aggregate", exp.aggregates, "Per-cell CSV path");
    e->add_option("--clean", exp.clean, "Clean dataset to use instead of simulating");
    e->add_option("--threads", exp.threads, "Worker threads (0 = hardware)");

    BiasArgs bias;
    auto* b = app.add_subcommand("bias", "Predict noise-induced coefficient bias for a built-in model");
    b->add_option("--system", bias.system, "lorenz | cubic_oscillator | burgers_nl | hyper_ks")->required();
    b->add_option("--sigma", bias.sigma, "Noise standard deviation");
    b->add_option("--distribution", bias.distribution, "gaussian | uniform");
    b->add_option("--clean", bias.clean, "Clean dataset for the mu* diagnostic");
    b->add_option("--csv", bias.csv, "Write the coefficient table as CSV");

    std::string noise_input;
    auto* n = app.add_subcommand("estimate-noise", "Estimate the noise level of a dataset");
    n->add_option("-i,--input", noise_input, "Dataset path")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (s->parsed()) return cmd_simulate(sim);
        if (d->parsed()) return cmd_discover(disc);
        if (e->parsed()) return cmd_experiment(exp);
        if (b->parsed()) return cmd_bias(bias);
        if (n->parsed()) return cmd_estimate_noise(noise_input);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}

#include "wsindy/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "wsindy/filtering.hpp"
#include "wsindy/rng.hpp"
#include "wsindy/testfn.hpp"

namespace wsindy {

namespace {

MultiIndex axis_derivative(std::size_t dims, std::size_t axis, int order) {
    MultiIndex a(dims, 0);
    a[axis] = order;
    return a;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const auto x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::string fmt(double x) {
    if (std::isnan(x)) return "";
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '"') c = ';';
    return s;
}

}  // namespace

Eigen::MatrixXd SystemPreset::true_weights(const ColumnIndex& columns) const {
    Eigen::MatrixXd W =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(columns.size()), static_cast<Eigen::Index>(library.state_dim));
    for (const auto& t : true_terms) {
        const TrialFunction f{TrialFunction::Kind::monomial, t.exponents, {}};
        const auto c = columns.find(t.alpha, f);
        if (!c) throw std::invalid_argument("true term " + f.label() + " is not in the library");
        W(static_cast<Eigen::Index>(*c), static_cast<Eigen::Index>(t.equation)) = t.value;
    }
    return W;
}

SystemPreset system_preset(SystemKind system) {
    SystemPreset p;
    p.system = system;
    p.sim = default_sim_config(system);
    switch (system) {
        case SystemKind::lorenz:
            p.library = {3, 6, {}, {{1}, {0}}, true};
            p.support_fraction = {0.02};
            p.true_terms = {
                {{0}, {1, 0, 0}, 0, -10.0}, {{0}, {0, 1, 0}, 0, 10.0}, {{0}, {1, 0, 0}, 1, 28.0},
                {{0}, {0, 1, 0}, 1, -1.0},  {{0}, {1, 0, 1}, 1, -1.0}, {{0}, {0, 0, 1}, 2, -8.0 / 3.0},
                {{0}, {1, 1, 0}, 2, 1.0},
            };
            break;
        case SystemKind::cubic_oscillator:
            p.library = {2, 6, {}, {{1}, {0}}, true};
            p.support_fraction = {0.02};
            p.true_terms = {
                {{0}, {3, 0}, 0, -0.1},
                {{0}, {0, 3}, 0, 2.0},
                {{0}, {3, 0}, 1, -2.0},
                {{0}, {0, 3}, 1, -0.1},
            };
            break;
        case SystemKind::burgers_nl: {
            p.library.state_dim = 1;
            p.library.poly_max_degree = 6;
            p.library.operators = {{0, 1}};
            for (int q = 0; q <= 6; ++q) p.library.operators.push_back(axis_derivative(2, 0, q));
            p.support_fraction = {0.25, 0.25};
            p.true_terms = {
                {{2, 0}, {1}, 0, 0.01}, {{1, 0}, {2}, 0, -0.5}, {{0, 0}, {3}, 0, -1.0},
                {{0, 0}, {2}, 0, 2.0},  {{0, 0}, {0}, 0, 1.0},
            };
            break;
        }
        case SystemKind::hyper_ks: {
            p.library.state_dim = 1;
            p.library.poly_max_degree = 8;
            p.library.operators = {{0, 1}};
            for (int q = 0; q <= 8; ++q) p.library.operators.push_back(axis_derivative(2, 0, q));
            // Area fraction 1/25, stretched along x where the sampled solution is least resolved.
            p.support_fraction = {0.25, 0.16};
            p.true_terms = {
                {{4, 0}, {1}, 0, 1.0},
                {{6, 0}, {1}, 0, 0.75},
                {{1, 0}, {2}, 0, -0.5},
                {{3, 0}, {2}, 0, 0.1},
            };
            break;
        }
    }
    return p;
}

FilterMode parse_filter_mode(const std::string& s) {
    if (s == "off" || s == "none") return FilterMode::off;
    if (s == "heuristic") return FilterMode::heuristic;
    if (s == "adaptive") return FilterMode::adaptive;
    throw std::invalid_argument("unknown filter mode '" + s + "'");
}

const char* to_string(FilterMode mode) noexcept {
    switch (mode) {
        case FilterMode::off:
            return "off";
        case FilterMode::heuristic:
            return "heuristic";
        case FilterMode::adaptive:
            return "adaptive";
    }
    return "off";
}

DiscoveryOptions discovery_options(const SystemPreset& preset) {
    DiscoveryOptions o;
    o.library = preset.library;
    o.support_fraction = preset.support_fraction;
    o.query_budget = preset.query_budget;
    return o;
}

namespace {

std::vector<int> adaptive_widths(const Dataset& data, double sigma_est, int cap) {
    const Grid& g = data.grid;
    const auto strides = g.strides();
    std::vector<int> widths;
    for (std::size_t q = 0; q < g.dims(); ++q) {
        // Line along axis q through the middle of the other axes, per component.
        std::size_t base = 0;
        for (std::size_t r = 0; r < g.dims(); ++r)
            if (r != q) base += (g.counts[r] / 2) * strides[r];
        int w = 1;
        for (std::size_t c = 0; c < data.state_dim; ++c) {
            std::vector<double> line(g.counts[q]);
            for (std::size_t i = 0; i < line.size(); ++i)
                line[i] = data.values[(base + i * strides[q]) * data.state_dim + c];
            const auto res = adaptive_smaf_width(line, sigma_est, g.resolution[q], 2.0, 1e-6, std::max(cap, 3));
            w = std::max(w, res.width);
        }
        widths.push_back(std::min(w, std::max(1, cap)));
    }
    return widths;
}

}  // namespace

DiscoveryResult run_discovery(const Dataset& data, const DiscoveryOptions& options) {
    DiscoveryResult out;
    const Grid& g = data.grid;
    out.radii = options.radii.empty() ? radii_for_fraction(g, options.support_fraction) : options.radii;
    for (int r : out.radii)
        if (r < 1) throw std::invalid_argument("run_discovery: test function radius must be at least one grid step");
    out.m = support_size(out.radii);

    const Dataset* used = &data;
    Dataset filtered;
    if (options.filter != FilterMode::off) {
        const auto est = estimate_sigma(data);
        out.sigma_est = est.sigma_est;
        const int d = static_cast<int>(g.dims()) - 1;
        const auto heuristic =
            filter_width_heuristic(est.sigma_est, options.library.poly_max_degree, options.tau_star, d, out.m);
        if (options.filter == FilterMode::heuristic) {
            out.filter_widths = heuristic;
        } else {
            int cap = static_cast<int>(std::floor(std::pow(static_cast<double>(out.m), 1.0 / (d + 1)) / 2.0));
            if (cap % 2 == 0) --cap;
            out.filter_widths = adaptive_widths(data, est.sigma_est, cap);
        }
        filtered = moving_average(data, FilterSpec{out.filter_widths});
        used = &filtered;
    }

    const auto queries = choose_query_points(g, out.radii, options.query_budget);
    const WeakSystem sys = assemble(*used, options.library, out.radii, queries, options.threads);
    out.K = static_cast<std::size_t>(sys.G.rows());
    out.columns = sys.columns;

    const LeastSquaresProblem problem(sys.G);
    out.weights.resize(sys.G.cols(), sys.b.cols());
    for (Eigen::Index e = 0; e < sys.b.cols(); ++e) {
        const Eigen::VectorXd b = sys.b.col(e);
        SparseModel model = mstls(problem, problem.project(b), b.norm(), options.mstls);
        out.weights.col(e) = model.weights;
        out.rank_deficient = out.rank_deficient || model.rank_deficient;
        out.models.push_back(std::move(model));
    }
    const double bn = sys.b.norm();
    out.residual = bn > 0.0 ? (sys.G * out.weights - sys.b).norm() / bn : 0.0;
    return out;
}

Metrics metrics(const Eigen::MatrixXd& w_hat, const Eigen::MatrixXd& w_true) {
    if (w_hat.rows() != w_true.rows() || w_hat.cols() != w_true.cols())
        throw std::invalid_argument("metrics: shape mismatch");
    Metrics m{true, true, 0.0};
    for (Eigen::Index i = 0; i < w_true.rows(); ++i)
        for (Eigen::Index j = 0; j < w_true.cols(); ++j) {
            const bool t = w_true(i, j) != 0.0, h = w_hat(i, j) != 0.0;
            if (t != h) m.support_exact = false;
            if (h && !t) m.support_subset = false;
            if (t) m.e_inf = std::max(m.e_inf, std::abs(w_hat(i, j) - w_true(i, j)) / std::abs(w_true(i, j)));
        }
    return m;
}

ExperimentConfig default_experiment_config(SystemKind system) {
    ExperimentConfig c;
    c.system = system;
    const auto preset = system_preset(system);
    c.sim = preset.sim;
    c.support_fraction = preset.support_fraction;
    c.query_budget = preset.query_budget;
    return c;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto sys_it = kv.find("system");
    if (sys_it == kv.end()) throw std::invalid_argument("config: 'system' is required");
    ExperimentConfig c = default_experiment_config(parse_system(sys_it->second));
    for (const auto& [key, v] : kv) {
        if (key == "system")
            continue;
        else if (key == "ladder") {
            c.ladder.clear();
            for (const auto& s : split_list(v)) c.ladder.push_back(to_u64(key, s));
        } else if (key == "sigma_mode") {
            if (v == "noise_ratio")
                c.sigma_mode = NoiseLevelMode::noise_ratio;
            else if (v == "absolute")
                c.sigma_mode = NoiseLevelMode::absolute_sigma;
            else
                throw std::invalid_argument("config: sigma_mode must be noise_ratio or absolute");
        } else if (key == "levels") {
            c.levels.clear();
            for (const auto& s : split_list(v)) c.levels.push_back(to_double(key, s));
        } else if (key == "distribution") {
            if (v == "gaussian")
                c.distribution = NoiseDistribution::gaussian;
            else if (v == "uniform")
                c.distribution = NoiseDistribution::uniform;
            else
                throw std::invalid_argument("config: distribution must be gaussian or uniform");
        } else if (key == "trials")
            c.trials = to_u64(key, v);
        else if (key == "support_fraction") {
            c.support_fraction.clear();
            for (const auto& s : split_list(v)) c.support_fraction.push_back(to_double(key, s));
        } else if (key == "query_budget")
            c.query_budget = to_u64(key, v);
        else if (key == "mode") {
            if (v == "grid")
                c.mode = MstlsMode::grid;
            else if (v == "oneshot")
                c.mode = MstlsMode::oneshot;
            else
                throw std::invalid_argument("config: mode must be grid or oneshot");
        } else if (key == "filter")
            c.filter = parse_filter_mode(v);
        else if (key == "tau_star")
            c.tau_star = to_double(key, v);
        else if (key == "master_seed")
            c.master_seed = to_u64(key, v);
        else if (key == "threads")
            c.threads = static_cast<unsigned>(to_u64(key, v));
        else if (key == "record_runtime")
            c.record_runtime = to_bool(key, v);
        else if (key == "time_points")
            c.sim.time_points = to_u64(key, v);
        else if (key == "space_points")
            c.sim.space_points = to_u64(key, v);
        else if (key == "t_final")
            c.sim.t_final = to_double(key, v);
        else if (key == "substeps")
            c.sim.substeps = static_cast<int>(to_u64(key, v));
        else if (key == "burn_in")
            c.sim.burn_in = to_double(key, v);
        else if (key == "initial_profile")
            c.sim.initial_profile = v;
        else if (key == "profile_scale")
            c.sim.profile_scale = to_double(key, v);
        else if (key == "profile_offset")
            c.sim.profile_offset = to_double(key, v);
        else if (key == "initial_state") {
            c.sim.initial_state.clear();
            for (const auto& s : split_list(v)) c.sim.initial_state.push_back(to_double(key, s));
        } else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    if (c.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (c.ladder.empty()) throw std::invalid_argument("config: ladder must be nonempty");
    if (c.levels.empty()) throw std::invalid_argument("config: levels must be nonempty");
    for (auto f : c.ladder)
        if (f < 1) throw std::invalid_argument("config: ladder factors must be >= 1");
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t level_index, std::size_t ladder_index, std::size_t trial) {
    return hash_combine(master, level_index, ladder_index, trial);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset* clean) {
    if (config.trials < 1 || config.ladder.empty() || config.levels.empty())
        throw std::invalid_argument("run_experiment: invalid config");
    Dataset simulated;
    if (!clean) {
        simulated = simulate(config.sim);
        clean = &simulated;
    }
    const SystemPreset preset = system_preset(config.system);
    DiscoveryOptions opts = discovery_options(preset);
    if (!config.support_fraction.empty()) opts.support_fraction = config.support_fraction;
    opts.query_budget = config.query_budget;
    opts.mstls.mode = config.mode;
    opts.filter = config.filter;
    opts.tau_star = config.tau_star;
    opts.threads = 1;

    std::vector<Dataset> levels_data;
    for (auto f : config.ladder)
        levels_data.push_back(subsample(*clean, std::vector<std::size_t>(clean->grid.dims(), f)));
    const Eigen::MatrixXd w_true = preset.true_weights(ColumnIndex(preset.library));

    const std::size_t L = config.levels.size(), R = config.ladder.size(), T = config.trials;
    std::vector<TrialRow> rows(L * R * T);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t task; (task = next.fetch_add(1)) < rows.size();) {
            const std::size_t li = task / (R * T), ri = (task / T) % R, t = task % T;
            TrialRow& row = rows[task];
            row.system = to_string(config.system);
            row.sigma_mode = config.sigma_mode == NoiseLevelMode::noise_ratio ? "noise_ratio" : "absolute";
            row.sigma = config.levels[li];
            row.level_index = li;
            row.ladder_index = ri;
            row.trial = t;
            row.seed = trial_seed(config.master_seed, li, ri, t);
            const auto& base = levels_data[ri];
            const auto start = std::chrono::steady_clock::now();
            try {
                row.radii = radii_for_fraction(base.grid, opts.support_fraction);
                row.m = support_size(row.radii);
                const Dataset noisy =
                    add_noise(base, NoiseSpec{config.distribution, config.sigma_mode, config.levels[li], row.seed});
                row.sigma_abs = noisy.sigma;
                const auto res = run_discovery(noisy, opts);
                const auto met = metrics(res.weights, w_true);
                row.support_exact = met.support_exact;
                row.support_subset = met.support_subset;
                row.e_inf = met.e_inf;
                for (const auto& m : res.models) row.lambda_hat.push_back(m.lambda_hat);
                if (res.rank_deficient) row.status = "ok_rank_deficient";
            } catch (const std::exception& e) {
                row.status = "failed: " + sanitize(e.what());
                row.support_exact = row.support_subset = false;
                row.e_inf = std::numeric_limits<double>::quiet_NaN();
            }
            if (config.record_runtime)
                row.runtime_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
    };
    unsigned nthreads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    nthreads = static_cast<unsigned>(std::min<std::size_t>(nthreads, rows.size()));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    ExperimentResult result;
    result.rows = std::move(rows);
    result.aggregates = aggregate(result.rows);
    return result;
}

std::vector<CellAggregate> aggregate(const std::vector<TrialRow>& rows) {
    std::map<std::pair<std::size_t, std::size_t>, CellAggregate> cells;
    std::map<std::pair<std::size_t, std::size_t>, double> sum_exact, sum_all;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> n_all;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.level_index, r.ladder_index);
        auto& c = cells[key];
        c.system = r.system;
        c.sigma = r.sigma;
        c.m = r.m;
        ++c.n_trials;
        if (r.support_exact) {
            ++c.n_exact;
            sum_exact[key] += r.e_inf;
        }
        if (r.support_subset) c.p_subset += 1.0;
        if (std::isfinite(r.e_inf)) {
            sum_all[key] += r.e_inf;
            ++n_all[key];
        }
    }
    std::vector<CellAggregate> out;
    for (auto& [key, c] : cells) {
        const double n = static_cast<double>(c.n_trials);
        c.p_exact = static_cast<double>(c.n_exact) / n;
        c.p_subset /= n;
        c.mean_e_inf_exact =
            c.n_exact ? sum_exact[key] / static_cast<double>(c.n_exact) : std::numeric_limits<double>::quiet_NaN();
        c.mean_e_inf_all =
            n_all[key] ? sum_all[key] / static_cast<double>(n_all[key]) : std::numeric_limits<double>::quiet_NaN();
        out.push_back(c);
    }
    return out;
}

void write_results_csv(const std::vector<TrialRow>& rows, std::ostream& out) {
    out << "system,sigma_mode,sigma,m,trial,support_exact,support_subset,e_inf,lambda_hat,runtime_ms,seed,status,"
           "radii\n";
    for (const auto& r : rows) {
        std::string lam, radii;
        for (std::size_t i = 0; i < r.lambda_hat.size(); ++i) lam += (i ? ";" : "") + fmt(r.lambda_hat[i]);
        for (std::size_t i = 0; i < r.radii.size(); ++i) radii += (i ? "x" : "") + std::to_string(r.radii[i]);
        out << r.system << ',' << r.sigma_mode << ',' << fmt(r.sigma) << ',' << r.m << ',' << r.trial << ','
            << (r.support_exact ? 1 : 0) << ',' << (r.support_subset ? 1 : 0) << ',' << fmt(r.e_inf) << ',' << lam
            << ',' << (r.runtime_ms >= 0.0 ? fmt(r.runtime_ms) : std::string()) << ',' << r.seed << ',' << r.status
            << ',' << radii << '\n';
    }
}

void write_aggregate_csv(const std::vector<CellAggregate>& cells, std::ostream& out) {
    out << "system,sigma,m,p_exact,p_subset,mean_e_inf_exact,mean_e_inf_all,n_trials\n";
    for (const auto& c : cells)
        out << c.system << ',' << fmt(c.sigma) << ',' << c.m << ',' << fmt(c.p_exact) << ',' << fmt(c.p_subset) << ','
            << fmt(c.mean_e_inf_exact) << ',' << fmt(c.mean_e_inf_all) << ',' << c.n_trials << '\n';
}

std::vector<ConcentrationLevel> concentration_study(const Dataset& clean, const LibrarySpec& library,
                                                    const std::vector<std::size_t>& factors,
                                                    std::size_t reference_factor, int coarse_radius,
                                                    std::size_t query_budget, double sigma, int draws,
                                                    int reference_draws, std::uint64_t seed) {
    if (factors.empty() || draws < 1 || reference_draws < 1)
        throw std::invalid_argument("concentration_study: bad arguments");
    const std::size_t D = clean.grid.dims();
    const std::size_t coarsest = *std::max_element(factors.begin(), factors.end());
    auto check = [&](std::size_t f) {
        if (f < 1 || coarsest % f) throw std::invalid_argument("concentration_study: factors must divide the coarsest");
    };
    check(reference_factor);
    for (auto f : factors) check(f);

    const Dataset coarse = subsample(clean, std::vector<std::size_t>(D, coarsest));
    const std::vector<int> coarse_radii(D, coarse_radius);
    const auto coarse_q = choose_query_points(coarse.grid, coarse_radii, query_budget);

    // Same physical test function and query locations at resolution factor f.
    auto system_at = [&](std::size_t f, const Dataset& data) {
        const std::size_t ratio = coarsest / f;
        std::vector<int> radii(D, coarse_radius * static_cast<int>(ratio));
        QueryLattice q = coarse_q;
        for (auto& p : q.points)
            for (auto& x : p) x *= ratio;
        return assemble(data, library, radii, q, 1).G;
    };
    auto noisy = [&](const Dataset& base, std::uint64_t s) {
        return add_noise(base, NoiseSpec{NoiseDistribution::gaussian, NoiseLevelMode::absolute_sigma, sigma, s});
    };

    const Dataset ref_base = subsample(clean, std::vector<std::size_t>(D, reference_factor));
    Eigen::MatrixXd ref;
    for (int i = 0; i < reference_draws; ++i) {
        const Eigen::MatrixXd G = system_at(reference_factor, noisy(ref_base, hash_combine(seed, 0xfeedULL, i)));
        ref = i == 0 ? G : Eigen::MatrixXd(ref + G);
    }
    ref /= reference_draws;

    std::vector<ConcentrationLevel> out;
    for (std::size_t li = 0; li < factors.size(); ++li) {
        const std::size_t f = factors[li];
        const Dataset base = subsample(clean, std::vector<std::size_t>(D, f));
        std::vector<double> dev;
        for (int i = 0; i < draws; ++i) {
            const Eigen::MatrixXd G = system_at(f, noisy(base, hash_combine(seed, li, i)));
            dev.push_back((G - ref).cwiseAbs().maxCoeff());
        }
        std::sort(dev.begin(), dev.end());
        const std::size_t n = dev.size();
        const double median = n % 2 ? dev[n / 2] : 0.5 * (dev[n / 2 - 1] + dev[n / 2]);
        out.push_back({f, support_size(std::vector<int>(D, coarse_radius * static_cast<int>(coarsest / f))), median});
    }
    return out;
}

}  // namespace wsindy

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wsindy/core_data.hpp"
#include "wsindy/simulate.hpp"
#include "wsindy/sparsereg.hpp"
#include "wsindy/weaksys.hpp"

namespace wsindy {

/// One nonzero coefficient of a known model.
struct TermSpec {
    MultiIndex alpha;
    std::vector<int> exponents;
    std::size_t equation = 0;
    double value = 0.0;
};

struct SystemPreset {
    SystemKind system = SystemKind::lorenz;
    SimConfig sim;
    LibrarySpec library;
    std::vector<double> support_fraction;
    std::size_t query_budget = 1000;
    std::vector<TermSpec> true_terms;

    /// True coefficients laid out as (columns x equations).
    [[nodiscard]] Eigen::MatrixXd true_weights(const ColumnIndex& columns) const;
    [[nodiscard]] Eigen::MatrixXd true_weights() const { return true_weights(ColumnIndex(library)); }
};

[[nodiscard]] SystemPreset system_preset(SystemKind system);

enum class FilterMode { off, heuristic, adaptive };
[[nodiscard]] FilterMode parse_filter_mode(const std::string& s);
[[nodiscard]] const char* to_string(FilterMode mode) noexcept;

struct DiscoveryOptions {
    LibrarySpec library;
    std::vector<double> support_fraction;
    /// Explicit half-widths; when nonempty they override support_fraction.
    std::vector<int> radii;
    std::size_t query_budget = 1000;
    MstlsOptions mstls;
    FilterMode filter = FilterMode::off;
    double tau_star = 0.01;
    unsigned threads = 1;
};

[[nodiscard]] DiscoveryOptions discovery_options(const SystemPreset& preset);

struct DiscoveryResult {
    Eigen::MatrixXd weights;  ///< columns x equations
    std::vector<SparseModel> models;
    ColumnIndex columns;
    std::vector<int> radii;
    std::size_t m = 0;
    std::size_t K = 0;
    std::vector<int> filter_widths;
    double sigma_est = 0.0;
    double residual = 0.0;  ///< ||G W - b||_F / ||b||_F
    bool rank_deficient = false;
};

/// Optional filter, assembly, and one MSTLS solve per state component.
[[nodiscard]] DiscoveryResult run_discovery(const Dataset& data, const DiscoveryOptions& options);

struct Metrics {
    bool support_exact = false;
    bool support_subset = false;
    double e_inf = 0.0;
};

[[nodiscard]] Metrics metrics(const Eigen::MatrixXd& w_hat, const Eigen::MatrixXd& w_true);

struct ExperimentConfig {
    SystemKind system = SystemKind::lorenz;
    SimConfig sim;
    std::vector<std::size_t> ladder{1};
    NoiseLevelMode sigma_mode = NoiseLevelMode::noise_ratio;
    NoiseDistribution distribution = NoiseDistribution::gaussian;
    std::vector<double> levels{0.0};
    std::size_t trials = 20;
    std::vector<double> support_fraction;
    std::size_t query_budget = 1000;
    MstlsMode mode = MstlsMode::grid;
    FilterMode filter = FilterMode::off;
    double tau_star = 0.01;
    std::uint64_t master_seed = 1;
    unsigned threads = 0;
    bool record_runtime = false;
};

/// Config with the preset's simulation settings for `system`.
[[nodiscard]] ExperimentConfig default_experiment_config(SystemKind system);
/// Parses flat key=value text; unknown keys are rejected.
[[nodiscard]] ExperimentConfig parse_experiment_config(const std::string& text);
[[nodiscard]] ExperimentConfig load_experiment_config(const std::string& path);

[[nodiscard]] std::uint64_t trial_seed(std::uint64_t master, std::size_t level_index, std::size_t ladder_index,
                                       std::size_t trial);

struct TrialRow {
    std::string system;
    std::string sigma_mode;
    double sigma = 0.0;  ///< configured level (sigma or noise ratio)
    double sigma_abs = 0.0;
    std::size_t m = 0;
    std::vector<int> radii;
    std::size_t level_index = 0, ladder_index = 0, trial = 0;
    bool support_exact = false;
    bool support_subset = false;
    double e_inf = 0.0;
    std::vector<double> lambda_hat;
    double runtime_ms = -1.0;
    std::uint64_t seed = 0;
    std::string status = "ok";
};

struct CellAggregate {
    std::string system;
    double sigma = 0.0;
    std::size_t m = 0;
    double p_exact = 0.0;
    double p_subset = 0.0;
    double mean_e_inf_exact = 0.0;  ///< NaN when no trial recovered the support
    double mean_e_inf_all = 0.0;
    std::size_t n_trials = 0;
    std::size_t n_exact = 0;
};

struct ExperimentResult {
    std::vector<TrialRow> rows;
    std::vector<CellAggregate> aggregates;
};

/// Runs every (level, ladder, trial) cell. `clean` may supply the finest
/// clean dataset to skip simulation.
[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset* clean = nullptr);

/// Aggregates recomputed from rows alone, ordered by (level, ladder).
[[nodiscard]] std::vector<CellAggregate> aggregate(const std::vector<TrialRow>& rows);

void write_results_csv(const std::vector<TrialRow>& rows, std::ostream& out);
void write_aggregate_csv(const std::vector<CellAggregate>& cells, std::ostream& out);

struct ConcentrationLevel {
    std::size_t factor = 1;
    std::size_t m = 0;
    double median_deviation = 0.0;
};

/// Median over draws of max |G^(m) - G_ref| for each subsampling factor, with
/// the same physical test function and query locations on every level.
/// G_ref averages `reference_draws` noisy assemblies at `reference_factor`.
[[nodiscard]] std::vector<ConcentrationLevel> concentration_study(const Dataset& clean, const LibrarySpec& library,
                                                                  const std::vector<std::size_t>& factors,
                                                                  std::size_t reference_factor, int coarse_radius,
                                                                  std::size_t query_budget, double sigma, int draws,
                                                                  int reference_draws, std::uint64_t seed);

}  // namespace wsindy

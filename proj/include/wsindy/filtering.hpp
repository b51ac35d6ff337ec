#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wsindy/core_data.hpp"

namespace wsindy {

/// Centered simple moving average with odd per-axis widths.
struct FilterSpec {
    std::vector<int> widths;

    [[nodiscard]] std::size_t total_width() const;
    void validate() const;
};

/// Moving average with half-sample symmetric reflection at the boundary
/// (the edge sample is repeated), which keeps the global mean exact.
[[nodiscard]] Dataset moving_average(const Dataset& data, const FilterSpec& spec);

/// Moving average of a single series, same boundary rule.
[[nodiscard]] std::vector<double> moving_average_1d(const std::vector<double>& x, int width);

struct NoiseEstimate {
    double sigma_est = 0.0;
    std::vector<double> per_axis;
    std::string method = "6th-difference rms, median over axes";
};

/// Unit-norm 7-point stencil annihilating polynomials of degree <= 5.
[[nodiscard]] const std::vector<double>& annihilating_stencil();

[[nodiscard]] NoiseEstimate estimate_sigma(const Dataset& data);

/// Per-axis odd widths from the noise estimate and the bias tolerance tau_star,
/// capped so the filter covers a small part of the test-function support of
/// m points in d + 1 dimensions.
[[nodiscard]] std::vector<int> filter_width_heuristic(double sigma_est, int p_max, double tau_star, int d,
                                                      std::size_t m);

struct AdaptiveWidth {
    int width = 3;
    int iterations = 0;
    bool fixed_point = false;
    std::vector<int> history;
};

/// Positive root of n^5 - n^3 - c by bisection (c >= 0).
[[nodiscard]] double smaf_root(double c);

/// Iterative width selection balancing smoothing bias (local curvature)
/// against variance. Stops when a width repeats or after 20 iterations.
[[nodiscard]] AdaptiveWidth adaptive_smaf_width(const std::vector<double>& series, double sigma_est, double h,
                                                double gamma = 2.0, double tau = 1e-6, int n_max = 101, int n_init = 3);

}  // namespace wsindy

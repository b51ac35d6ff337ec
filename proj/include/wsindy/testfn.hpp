#pragma once

#include <cstddef>
#include <vector>

#include "wsindy/core_data.hpp"

namespace wsindy {

/// The bump phi(v) = exp(c / (v^2 - 1)) on (-1, 1), zero elsewhere, with
/// exact derivatives phi^(k) = P_k(v) / (v^2 - 1)^(2k) * phi(v).
class BumpFunction {
public:
    explicit BumpFunction(double shape_constant = 9.0, int max_order = 12);

    /// k-th derivative at v. Throws std::out_of_range past max_order().
    [[nodiscard]] double eval(int k, double v) const;
    [[nodiscard]] double shape_constant() const noexcept { return c_; }
    [[nodiscard]] int max_order() const noexcept { return static_cast<int>(poly_.size()) - 1; }
    /// Coefficients of P_k in increasing powers of v.
    [[nodiscard]] const std::vector<double>& numerator(int k) const { return poly_.at(k); }

private:
    double c_;
    std::vector<std::vector<double>> poly_;
};

/// phi^(k)(v) for the standard shape constant 9.
[[nodiscard]] double bump_eval(int k, double v);

/// Sampled derivative of the separable test function, times the cell volume.
struct Stencil {
    std::vector<int> alpha;
    std::vector<int> radii;
    /// Row-major over (2 r_1 + 1) x ... x (2 r_D + 1); offset -r first.
    std::vector<double> weights;
    /// Per-axis 1-D factors whose outer product is `weights`.
    std::vector<std::vector<double>> factors;

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
};

[[nodiscard]] Stencil build_stencil(const Grid& grid, const std::vector<int>& radii, const std::vector<int>& alpha,
                                    const BumpFunction& bump);
[[nodiscard]] Stencil build_stencil(const Grid& grid, const std::vector<int>& radii, const std::vector<int>& alpha);

/// Number of grid points covered: prod(2 r_q + 1).
[[nodiscard]] std::size_t support_size(const std::vector<int>& radii);
[[nodiscard]] std::size_t support_size(const Stencil& stencil);

/// Largest half-widths whose support spans at most `fraction` of each axis.
[[nodiscard]] std::vector<int> radii_for_fraction(const Grid& grid, const std::vector<double>& fraction);

}  // namespace wsindy

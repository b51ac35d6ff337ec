#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wsindy/sparsereg.hpp"
#include "wsindy/weaksys.hpp"

namespace wsindy {

/// Noise law entering the cross-correlation bias. `custom` takes raw moments
/// M_0 = 1, M_1, ... of the noise itself (sigma is then ignored).
struct NoiseLaw {
    enum class Kind { gaussian, uniform, custom };
    Kind kind = Kind::gaussian;
    std::vector<double> moments;

    /// Moments M_0..M_p at standard deviation sigma.
    [[nodiscard]] std::vector<double> moment_sequence(int p, double sigma) const;
};

[[nodiscard]] double binomial(int n, int k);
/// (n)!! for odd or even n >= -1, with (-1)!! = 0!! = 1.
[[nodiscard]] double double_factorial(int n);

/// Univariate block A_{ij} = C(j, i) M_{j-i}, i, j = 0..p.
[[nodiscard]] Eigen::MatrixXd moment_block(const std::vector<double>& moments, int p);

/// Gaussian moment block over graded monomials of n variables.
[[nodiscard]] Eigen::MatrixXd gaussian_moment_block(int p_max, double sigma, std::size_t n = 1);
/// Closed-form inverse: entries (-1)^{sum (j_k - i_k)/2} times the block.
[[nodiscard]] Eigen::MatrixXd gaussian_moment_inverse(int p_max, double sigma, std::size_t n = 1);

struct InverseFactors {
    std::vector<double> f;
    /// false where the recurrence would divide by a vanishing moment; the
    /// factor is then set to 0, which is harmless because the matching
    /// matrix entries vanish as well.
    std::vector<bool> defined;
};

/// Factors f(q) with (A^{-1})_{ij} = f(j - i) A_{ij}.
[[nodiscard]] InverseFactors general_moment_inverse_factor(const std::vector<double>& moments);

/// Characteristic function of the noise, product over components.
[[nodiscard]] double trig_multiplier(const std::vector<double>& omega, const NoiseLaw& law, double sigma);

/// Bias operator over a whole library (block diagonal per operator), and its closed-form inverse.
struct MomentMatrix {
    NoiseLaw law;
    double sigma = 0.0;
    Eigen::MatrixXd A;
    Eigen::MatrixXd A_inv;
    bool invertible = true;
};

[[nodiscard]] MomentMatrix build_moment_matrix(const ColumnIndex& columns, const NoiseLaw& law, double sigma);

/// Continuum least-squares coefficients A^{-1} w*.
[[nodiscard]] Eigen::VectorXd predict_continuum_coefficients(const Eigen::VectorXd& w_true, const MomentMatrix& mm);

/// Terms that noisy trial functions add to the true model: A w* - w*.
[[nodiscard]] Eigen::VectorXd generated_bias_terms(const Eigen::VectorXd& w_true, const MomentMatrix& mm);

struct CriticalNoiseBounds {
    double lower_sq = 0.0;
    double upper_sq = 0.0;
    bool unconditional = false;  ///< case (i): any noise level is admissible
    int degree = 0;
    std::string tag;
};

/// Bracket on sigma_c^2 from the maximal degree and the spread of |w*|.
[[nodiscard]] CriticalNoiseBounds critical_noise_bounds(const Eigen::VectorXd& w_true, const ColumnIndex& columns);

/// Bracket for the one-shot estimator, which additionally depends on G*.
[[nodiscard]] CriticalNoiseBounds mstls_critical_bounds(const Eigen::MatrixXd& G_star, const Eigen::VectorXd& w_true,
                                                        const ColumnIndex& columns);

/// Smallest Gaussian sigma at which the continuum gap delta_1 changes sign,
/// found by a log scan and bisection. Empty if no flip below sigma_max.
[[nodiscard]] std::optional<double> exact_flip_sigma(const Eigen::VectorXd& w_true, const ColumnIndex& columns,
                                                     double sigma_max = 10.0);

/// min over nonempty S within S* of ||P_perp(G*_{S* \ S}) b*|| / ||b*|| - (|S| + 1) / total_columns.
/// S = S* is included: it corresponds to the empty model.
[[nodiscard]] double mu_star(const Eigen::MatrixXd& G_star, const Eigen::VectorXd& b_star, const Support& true_support,
                             std::size_t total_columns, std::size_t budget = std::size_t{1} << 20);

struct NormBoundsReport {
    int p = 0;
    double sigma = 0.0;
    double norm1 = 0.0, norm2 = 0.0, norm_inf = 0.0;
    double l_norm1 = 0.0;
    double bound_a = 0.0, bound_l = 0.0;
    bool a_ok = false, l_ok = false, l_applicable = false, order_ok = false;
};

[[nodiscard]] NormBoundsReport moment_norm_bounds_check(int p, double sigma);

}  // namespace wsindy

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wsindy {

using Support = std::vector<int>;  ///< sorted 0-based column indices

[[nodiscard]] Eigen::VectorXd hard_threshold(const Eigen::VectorXd& w, double lambda);
[[nodiscard]] Support support_of(const Eigen::VectorXd& w);

struct LsqResult {
    Eigen::VectorXd weights;
    int rank = 0;
    bool rank_deficient = false;
};

/// Thin QR of a column-equilibrated G, reused for every restricted solve:
/// min ||G_S w - b|| = min ||R_S z - Q^T b|| with z the scaled weights.
class LeastSquaresProblem {
public:
    explicit LeastSquaresProblem(const Eigen::MatrixXd& G);

    /// Q^T b, the only data the restricted solves need.
    [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd& b) const;
    /// Minimum-norm solution over columns in S; zero elsewhere.
    [[nodiscard]] LsqResult solve(const Eigen::VectorXd& qtb, const Support& S) const;
    /// ||G w||_2 computed from the factorization.
    [[nodiscard]] double image_norm(const Eigen::VectorXd& w) const;
    [[nodiscard]] std::size_t columns() const noexcept { return static_cast<std::size_t>(scale_.size()); }

    static constexpr double kRankTolerance = 1e-10;

private:
    Eigen::VectorXd scale_;  ///< column norms (1 for zero columns)
    Eigen::MatrixXd R_;      ///< min(K, P) x P upper trapezoid of G diag(1/scale)
    Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
};

[[nodiscard]] LsqResult restricted_lsq(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const Support& S);

struct LossPoint {
    double lambda = 0.0;
    double loss = 0.0;
    std::size_t support_size = 0;
};

struct SparseModel {
    Eigen::VectorXd weights;
    Support support;
    double lambda_hat = 0.0;
    std::vector<LossPoint> loss_trace;
    double reference_norm = 0.0;
    int iterations = 0;
    bool rank_deficient = false;
};

/// Alternate restricted least squares and hard thresholding. max_iters = 0
/// means the number of columns; max_iters = 1 is a single thresholding round.
[[nodiscard]] SparseModel stls(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, double lambda, int max_iters = 0);
[[nodiscard]] SparseModel stls(const LeastSquaresProblem& problem, const Eigen::VectorXd& qtb, double lambda,
                               int max_iters = 0);

/// Midpoints between consecutive distinct sorted |w0| values (with 0 prepended).
[[nodiscard]] std::vector<double> one_shot_lambda_grid(const Eigen::VectorXd& w0);

/// log10-spaced grid from 10^lo to 10^hi with n points.
[[nodiscard]] std::vector<double> log_lambda_grid(double lo = -4.0, double hi = 0.0, int n = 100);

enum class MstlsMode { grid, oneshot };
enum class LossDenominator { fitted, rhs };

struct MstlsOptions {
    MstlsMode mode = MstlsMode::grid;
    std::vector<double> lambdas = log_lambda_grid();
    int stls_iters = 0;  ///< 0: number of columns; ignored in oneshot mode
    LossDenominator denominator = LossDenominator::fitted;
};

[[nodiscard]] SparseModel mstls(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const MstlsOptions& options = {});
[[nodiscard]] SparseModel mstls(const LeastSquaresProblem& problem, const Eigen::VectorXd& qtb, double rhs_norm,
                                const MstlsOptions& options = {});

/// Loss rounded to 12 significant digits, the comparison key for ties.
[[nodiscard]] double round_loss(double x);

/// min over the true support of |w| minus max over its complement.
[[nodiscard]] double threshold_feasibility(const Eigen::VectorXd& w, const Support& true_support);

void write_loss_trace_csv(const SparseModel& model, const std::string& path);

}  // namespace wsindy

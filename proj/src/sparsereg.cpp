#include "wsindy/sparsereg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace wsindy {

Eigen::VectorXd hard_threshold(const Eigen::VectorXd& w, double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("hard_threshold: lambda must be >= 0");
    Eigen::VectorXd out = w;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        if (!(std::abs(out[i]) >= lambda)) out[i] = 0.0;
    return out;
}

Support support_of(const Eigen::VectorXd& w) {
    Support s;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] != 0.0) s.push_back(static_cast<int>(i));
    return s;
}

LeastSquaresProblem::LeastSquaresProblem(const Eigen::MatrixXd& G) {
    if (G.cols() == 0) throw std::invalid_argument("least squares: G has no columns");
    scale_ = G.colwise().norm().transpose();
    for (Eigen::Index c = 0; c < scale_.size(); ++c)
        if (!(scale_[c] > 0.0)) scale_[c] = 1.0;
    qr_.compute(G * scale_.cwiseInverse().asDiagonal());
    const Eigen::Index r = std::min(G.rows(), G.cols());
    R_ = qr_.matrixQR().topRows(r).triangularView<Eigen::Upper>();
}

Eigen::VectorXd LeastSquaresProblem::project(const Eigen::VectorXd& b) const {
    if (b.size() != qr_.rows()) throw std::invalid_argument("least squares: b length differs from G rows");
    Eigen::VectorXd qtb = qr_.householderQ().adjoint() * b;
    return qtb.head(R_.rows());
}

LsqResult LeastSquaresProblem::solve(const Eigen::VectorXd& qtb, const Support& S) const {
    LsqResult out;
    out.weights = Eigen::VectorXd::Zero(scale_.size());
    if (S.empty()) return out;
    Eigen::MatrixXd Rs(R_.rows(), static_cast<Eigen::Index>(S.size()));
    for (std::size_t i = 0; i < S.size(); ++i) Rs.col(static_cast<Eigen::Index>(i)) = R_.col(S[i]);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(kRankTolerance);
    cod.compute(Rs);
    out.rank = static_cast<int>(cod.rank());
    out.rank_deficient = out.rank < static_cast<int>(S.size());
    if (!out.rank_deficient) {
        const Eigen::VectorXd z = cod.solve(qtb);
        for (std::size_t i = 0; i < S.size(); ++i) out.weights[S[i]] = z[static_cast<Eigen::Index>(i)] / scale_[S[i]];
        return out;
    }
    // The scaled solution is minimum-norm in z, not in w; redo the solve on the
    // unscaled columns so the null-space component of w itself is zero.
    for (std::size_t i = 0; i < S.size(); ++i) Rs.col(static_cast<Eigen::Index>(i)) *= scale_[S[i]];
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> raw;
    raw.setThreshold(kRankTolerance);
    raw.compute(Rs);
    const Eigen::VectorXd w = raw.solve(qtb);
    for (std::size_t i = 0; i < S.size(); ++i) out.weights[S[i]] = w[static_cast<Eigen::Index>(i)];
    return out;
}

double LeastSquaresProblem::image_norm(const Eigen::VectorXd& w) const { return (R_ * scale_.cwiseProduct(w)).norm(); }

LsqResult restricted_lsq(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const Support& S) {
    for (int c : S)
        if (c < 0 || c >= G.cols()) throw std::invalid_argument("restricted_lsq: support index out of range");
    const LeastSquaresProblem problem(G);
    return problem.solve(problem.project(b), S);
}

namespace {

using SolveCache = std::map<Support, LsqResult>;

const LsqResult& cached_solve(const LeastSquaresProblem& p, const Eigen::VectorXd& qtb, const Support& S,
                              SolveCache& cache) {
    auto it = cache.find(S);
    if (it == cache.end()) it = cache.emplace(S, p.solve(qtb, S)).first;
    return it->second;
}

Support full_support(std::size_t n) {
    Support s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<int>(i);
    return s;
}

SparseModel stls_cached(const LeastSquaresProblem& p, const Eigen::VectorXd& qtb, double lambda, int max_iters,
                        SolveCache& cache) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("stls: lambda must be >= 0");
    const int P = static_cast<int>(p.columns());
    if (max_iters <= 0) max_iters = P;
    Support S = full_support(p.columns());
    const LsqResult* cur = &cached_solve(p, qtb, S, cache);
    int it = 0;
    while (it < max_iters && !S.empty()) {
        Support next = support_of(hard_threshold(cur->weights, lambda));
        ++it;
        if (next == S) break;
        S = std::move(next);
        cur = &cached_solve(p, qtb, S, cache);
    }
    SparseModel m;
    m.weights = cur->weights;
    m.support = support_of(m.weights);
    m.lambda_hat = lambda;
    m.iterations = it;
    m.rank_deficient = cur->rank_deficient;
    return m;
}

}  // namespace

SparseModel stls(const LeastSquaresProblem& problem, const Eigen::VectorXd& qtb, double lambda, int max_iters) {
    SolveCache cache;
    return stls_cached(problem, qtb, lambda, max_iters, cache);
}

SparseModel stls(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, double lambda, int max_iters) {
    const LeastSquaresProblem problem(G);
    return stls(problem, problem.project(b), lambda, max_iters);
}

std::vector<double> one_shot_lambda_grid(const Eigen::VectorXd& w0) {
    if (w0.size() < 1) throw std::invalid_argument("one_shot_lambda_grid: empty coefficient vector");
    std::vector<double> mags{0.0};
    for (Eigen::Index i = 0; i < w0.size(); ++i) mags.push_back(std::abs(w0[i]));
    std::sort(mags.begin(), mags.end());
    mags.erase(std::unique(mags.begin(), mags.end()), mags.end());
    std::vector<double> grid;
    for (std::size_t i = 0; i + 1 < mags.size(); ++i) grid.push_back(0.5 * (mags[i] + mags[i + 1]));
    return grid;
}

std::vector<double> log_lambda_grid(double lo, double hi, int n) {
    if (n < 1) throw std::invalid_argument("log_lambda_grid: need at least one point");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double e = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
        g[static_cast<std::size_t>(i)] = std::pow(10.0, e);
    }
    return g;
}

double round_loss(double x) {
    if (!std::isfinite(x)) return x;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.11e", x);
    return std::strtod(buf, nullptr);
}

SparseModel mstls(const LeastSquaresProblem& problem, const Eigen::VectorXd& qtb, double rhs_norm,
                  const MstlsOptions& options) {
    SolveCache cache;
    const std::size_t P = problem.columns();
    const LsqResult& ls = cached_solve(problem, qtb, full_support(P), cache);
    const Eigen::VectorXd w0 = ls.weights;
    const double ref = problem.image_norm(w0);
    const double denom = options.denominator == LossDenominator::fitted ? ref : rhs_norm;

    std::vector<double> lambdas = options.lambdas;
    int iters = options.stls_iters;
    if (options.mode == MstlsMode::oneshot) {
        lambdas = one_shot_lambda_grid(w0);
        iters = 1;
    }
    if (lambdas.empty()) throw std::invalid_argument("mstls: empty lambda grid");

    SparseModel best;
    double best_key = std::numeric_limits<double>::infinity();
    bool have = false;
    std::vector<LossPoint> trace;
    for (double lambda : lambdas) {
        SparseModel m = stls_cached(problem, qtb, lambda, iters, cache);
        const double num = problem.image_norm(m.weights - w0);
        const double ratio = denom > 0.0 ? num / denom : 0.0;
        const double loss = ratio + static_cast<double>(m.support.size()) / static_cast<double>(P);
        trace.push_back({lambda, loss, m.support.size()});
        const double key = round_loss(loss);
        if (!have || key < best_key || (key == best_key && lambda < best.lambda_hat)) {
            best = std::move(m);
            best_key = key;
            have = true;
        }
    }
    best.loss_trace = std::move(trace);
    best.reference_norm = ref;
    return best;
}

SparseModel mstls(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const MstlsOptions& options) {
    const LeastSquaresProblem problem(G);
    return mstls(problem, problem.project(b), b.norm(), options);
}

double threshold_feasibility(const Eigen::VectorXd& w, const Support& true_support) {
    if (true_support.empty()) throw std::invalid_argument("threshold_feasibility: empty true support");
    std::vector<bool> in(static_cast<std::size_t>(w.size()), false);
    double on = std::numeric_limits<double>::infinity();
    for (int j : true_support) {
        if (j < 0 || j >= w.size()) throw std::invalid_argument("threshold_feasibility: index out of range");
        in[static_cast<std::size_t>(j)] = true;
        on = std::min(on, std::abs(w[j]));
    }
    double off = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!in[static_cast<std::size_t>(i)]) off = std::max(off, std::abs(w[i]));
    return on - off;
}

void write_loss_trace_csv(const SparseModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.precision(17);
    out << "lambda,loss,support_size\n";
    for (const auto& p : model.loss_trace) out << p.lambda << ',' << p.loss << ',' << p.support_size << '\n';
}

}  // namespace wsindy

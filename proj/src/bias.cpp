#include "wsindy/bias.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "wsindy/errors.hpp"

namespace wsindy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Multipliers this small are treated as zeros of the characteristic function.
constexpr double kVanishingMultiplier = 1e-12;

bool is_zero_alpha(const MultiIndex& a) {
    return std::all_of(a.begin(), a.end(), [](int x) { return x == 0; });
}

Eigen::MatrixXd product_block(const Eigen::MatrixXd& uni, const std::vector<std::vector<int>>& monomials) {
    const auto J = static_cast<Eigen::Index>(monomials.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(J, J);
    for (Eigen::Index r = 0; r < J; ++r)
        for (Eigen::Index c = 0; c < J; ++c) {
            const auto& i = monomials[static_cast<std::size_t>(r)];
            const auto& j = monomials[static_cast<std::size_t>(c)];
            double v = 1.0;
            for (std::size_t k = 0; k < i.size() && v != 0.0; ++k) v *= i[k] <= j[k] ? uni(i[k], j[k]) : 0.0;
            A(r, c) = v;
        }
    return A;
}

Eigen::MatrixXd inverse_from_factors(const Eigen::MatrixXd& A, const InverseFactors& f) {
    Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(A.rows(), A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = i; j < A.cols(); ++j) inv(i, j) = f.f[static_cast<std::size_t>(j - i)] * A(i, j);
    return inv;
}

Support true_support_of(const Eigen::VectorXd& w) { return support_of(w); }

int max_degree_on(const Support& S, const ColumnIndex& columns) {
    int p = 0;
    for (int c : S) p = std::max(p, columns[static_cast<std::size_t>(c)].trial.degree());
    return p;
}

// A pure square (some exponent >= 2) under the identity operator.
bool has_undifferentiated_square(const Support& S, const ColumnIndex& columns) {
    for (int c : S) {
        const auto& col = columns[static_cast<std::size_t>(c)];
        if (col.trial.kind != TrialFunction::Kind::monomial || !is_zero_alpha(col.alpha)) continue;
        if (std::any_of(col.trial.exponents.begin(), col.trial.exponents.end(), [](int e) { return e >= 2; }))
            return true;
    }
    return false;
}

}  // namespace

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

double double_factorial(int n) {
    if (n < -1) throw std::invalid_argument("double_factorial: argument below -1");
    double r = 1.0;
    for (int k = n; k > 1; k -= 2) r *= k;
    return r;
}

std::vector<double> NoiseLaw::moment_sequence(int p, double sigma) const {
    std::vector<double> M(static_cast<std::size_t>(p + 1), 0.0);
    switch (kind) {
        case Kind::gaussian:
            for (int k = 0; k <= p; k += 2)
                M[static_cast<std::size_t>(k)] = double_factorial(k - 1) * std::pow(sigma, k);
            break;
        case Kind::uniform: {
            const double a = sigma * std::sqrt(3.0);
            for (int k = 0; k <= p; k += 2) M[static_cast<std::size_t>(k)] = std::pow(a, k) / (k + 1);
            break;
        }
        case Kind::custom:
            if (moments.size() < M.size()) throw std::invalid_argument("noise law: not enough custom moments");
            std::copy_n(moments.begin(), M.size(), M.begin());
            break;
    }
    return M;
}

Eigen::MatrixXd moment_block(const std::vector<double>& moments, int p) {
    if (p < 0 || moments.size() < static_cast<std::size_t>(p + 1))
        throw std::invalid_argument("moment_block: need moments M_0..M_p");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p + 1, p + 1);
    for (int i = 0; i <= p; ++i)
        for (int j = i; j <= p; ++j) A(i, j) = binomial(j, i) * moments[static_cast<std::size_t>(j - i)];
    return A;
}

Eigen::MatrixXd gaussian_moment_block(int p_max, double sigma, std::size_t n) {
    if (p_max < 0 || sigma < 0.0) throw std::invalid_argument("gaussian_moment_block: bad arguments");
    Eigen::MatrixXd uni = Eigen::MatrixXd::Zero(p_max + 1, p_max + 1);
    for (int i = 0; i <= p_max; ++i)
        for (int j = i; j <= p_max; j += 2)
            uni(i, j) = binomial(j, i) * double_factorial(j - i - 1) * std::pow(sigma, j - i);
    if (n == 1) return uni;
    return product_block(uni, graded_monomials(n, p_max));
}

Eigen::MatrixXd gaussian_moment_inverse(int p_max, double sigma, std::size_t n) {
    Eigen::MatrixXd uni = gaussian_moment_block(p_max, sigma, 1);
    for (int i = 0; i <= p_max; ++i)
        for (int j = i; j <= p_max; j += 2)
            if (((j - i) / 2) % 2 == 1) uni(i, j) = -uni(i, j);
    if (n == 1) return uni;
    return product_block(uni, graded_monomials(n, p_max));
}

InverseFactors general_moment_inverse_factor(const std::vector<double>& moments) {
    if (moments.empty() || moments[0] != 1.0)
        throw std::invalid_argument("general_moment_inverse_factor: M_0 must be 1");
    const std::size_t P = moments.size();
    InverseFactors out{std::vector<double>(P, 0.0), std::vector<bool>(P, true)};
    out.f[0] = 1.0;
    for (std::size_t q = 1; q < P; ++q) {
        if (moments[q] == 0.0) {
            out.defined[q] = false;
            continue;
        }
        double s = 0.0;
        for (std::size_t l = 0; l < q; ++l)
            s += binomial(static_cast<int>(q), static_cast<int>(l)) * moments[q - l] * moments[l] * out.f[l];
        out.f[q] = -s / moments[q];
    }
    return out;
}

double trig_multiplier(const std::vector<double>& omega, const NoiseLaw& law, double sigma) {
    double r = 1.0;
    for (double w : omega) {
        switch (law.kind) {
            case NoiseLaw::Kind::gaussian:
                r *= std::exp(-0.5 * sigma * sigma * w * w);
                break;
            case NoiseLaw::Kind::uniform: {
                const double x = sigma * std::sqrt(3.0) * w;
                r *= x == 0.0 ? 1.0 : std::sin(x) / x;
                break;
            }
            case NoiseLaw::Kind::custom:
                throw std::invalid_argument(
                    "trig_multiplier: custom moment laws have no closed-form characteristic function");
        }
    }
    return r;
}

MomentMatrix build_moment_matrix(const ColumnIndex& columns, const NoiseLaw& law, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("build_moment_matrix: negative sigma");
    int p = 0;
    for (const auto& t : columns.trials()) p = std::max(p, t.degree());
    const auto M = law.moment_sequence(p, sigma);
    const Eigen::MatrixXd uni = moment_block(M, p);
    const Eigen::MatrixXd uni_inv = inverse_from_factors(uni, general_moment_inverse_factor(M));

    const auto P = static_cast<Eigen::Index>(columns.size());
    MomentMatrix mm{law, sigma, Eigen::MatrixXd::Zero(P, P), Eigen::MatrixXd::Zero(P, P), true};
    for (Eigen::Index r = 0; r < P; ++r) {
        const auto& cr = columns[static_cast<std::size_t>(r)];
        if (cr.trial.kind != TrialFunction::Kind::monomial) {
            const double rho = trig_multiplier(cr.trial.omega, law, sigma);
            mm.A(r, r) = rho;
            // A sine zero is never hit exactly in floating point.
            if (std::abs(rho) <= kVanishingMultiplier) {
                mm.invertible = false;
                mm.A_inv(r, r) = std::numeric_limits<double>::quiet_NaN();
            } else {
                mm.A_inv(r, r) = 1.0 / rho;
            }
            continue;
        }
        for (Eigen::Index c = 0; c < P; ++c) {
            const auto& cc = columns[static_cast<std::size_t>(c)];
            if (cc.s != cr.s || cc.trial.kind != TrialFunction::Kind::monomial) continue;
            double a = 1.0, ai = 1.0;
            for (std::size_t k = 0; k < cr.trial.exponents.size(); ++k) {
                const int i = cr.trial.exponents[k], j = cc.trial.exponents[k];
                if (i > j) {
                    a = ai = 0.0;
                    break;
                }
                a *= uni(i, j);
                ai *= uni_inv(i, j);
            }
            mm.A(r, c) = a;
            mm.A_inv(r, c) = ai;
        }
    }
    return mm;
}

Eigen::VectorXd predict_continuum_coefficients(const Eigen::VectorXd& w_true, const MomentMatrix& mm) {
    if (w_true.size() != mm.A.cols()) throw std::invalid_argument("predict_continuum_coefficients: length mismatch");
    if (!mm.invertible) throw SingularBiasError("a trigonometric noise multiplier vanishes");
    return mm.A_inv * w_true;
}

Eigen::VectorXd generated_bias_terms(const Eigen::VectorXd& w_true, const MomentMatrix& mm) {
    if (w_true.size() != mm.A.cols()) throw std::invalid_argument("generated_bias_terms: length mismatch");
    return mm.A * w_true - w_true;
}

CriticalNoiseBounds critical_noise_bounds(const Eigen::VectorXd& w_true, const ColumnIndex& columns) {
    if (w_true.size() != static_cast<Eigen::Index>(columns.size()))
        throw std::invalid_argument("critical_noise_bounds: length mismatch");
    const Support S = true_support_of(w_true);
    if (S.empty()) throw std::invalid_argument("critical_noise_bounds: empty true support");
    CriticalNoiseBounds out;
    out.degree = max_degree_on(S, columns);
    if (out.degree <= 1 || (out.degree == 2 && !has_undifferentiated_square(S, columns))) {
        out.lower_sq = out.upper_sq = kInf;
        out.unconditional = true;
        out.tag = "case (i): no spurious terms";
        return out;
    }
    double lo = kInf, hi = 0.0;
    for (int c : S) {
        lo = std::min(lo, std::abs(w_true[c]));
        hi = std::max(hi, std::abs(w_true[c]));
    }
    const double C = binomial(out.degree, 2);
    out.lower_sq = lo / (2.0 * C * std::numbers::e * hi);
    out.upper_sq = 1.0 / C;
    out.tag = "case (ii): bracket";
    return out;
}

CriticalNoiseBounds mstls_critical_bounds(const Eigen::MatrixXd& G_star, const Eigen::VectorXd& w_true,
                                          const ColumnIndex& columns) {
    if (G_star.cols() != w_true.size()) throw std::invalid_argument("mstls_critical_bounds: length mismatch");
    CriticalNoiseBounds out = critical_noise_bounds(w_true, columns);
    if (out.unconditional) return out;
    const Support S = true_support_of(w_true);
    std::vector<Eigen::Index> poly;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& t = columns[c].trial;
        if (t.kind == TrialFunction::Kind::monomial && t.degree() <= out.degree)
            poly.push_back(static_cast<Eigen::Index>(c));
    }
    Eigen::MatrixXd Gp(G_star.rows(), static_cast<Eigen::Index>(poly.size()));
    for (std::size_t i = 0; i < poly.size(); ++i) Gp.col(static_cast<Eigen::Index>(i)) = G_star.col(poly[i]);
    const double gp_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(Gp).singularValues()(0);
    double lo = kInf, hi = 0.0;
    for (int c : S) {
        lo = std::min(lo, std::abs(w_true[c]));
        hi = std::max(hi, std::abs(w_true[c]));
    }
    const double P = static_cast<double>(columns.size());
    const double geometric = (G_star * w_true).norm() / (P * gp_norm * w_true.norm());
    const double C = binomial(out.degree, 2);
    out.lower_sq = std::min(geometric, lo / (2.0 * hi)) / (std::numbers::e * C);
    out.upper_sq = 1.0 / C;
    out.tag = "one-shot bracket";
    return out;
}

std::optional<double> exact_flip_sigma(const Eigen::VectorXd& w_true, const ColumnIndex& columns, double sigma_max) {
    const Support S = true_support_of(w_true);
    if (S.empty()) throw std::invalid_argument("exact_flip_sigma: empty true support");
    const NoiseLaw gauss{};
    auto gap = [&](double sigma) {
        return threshold_feasibility(predict_continuum_coefficients(w_true, build_moment_matrix(columns, gauss, sigma)),
                                     S);
    };
    constexpr int kScan = 400;
    double prev = 0.0;
    for (int i = 0; i <= kScan; ++i) {
        const double sigma = sigma_max * std::pow(10.0, -6.0 + 6.0 * i / kScan);
        if (gap(sigma) <= 0.0) {
            double a = prev, b = sigma;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (a + b);
                (gap(mid) > 0.0 ? a : b) = mid;
            }
            return 0.5 * (a + b);
        }
        prev = sigma;
    }
    return std::nullopt;
}

double mu_star(const Eigen::MatrixXd& G_star, const Eigen::VectorXd& b_star, const Support& true_support,
               std::size_t total_columns, std::size_t budget) {
    const std::size_t s = true_support.size();
    if (s == 0) throw std::invalid_argument("mu_star: empty true support");
    if (total_columns == 0) throw std::invalid_argument("mu_star: total column count must be positive");
    if (s >= 63 || (std::size_t{1} << s) - 1 > budget)
        throw BudgetError("mu_star: 2^" + std::to_string(s) + " - 1 subsets exceed the enumeration budget");
    const double bnorm = b_star.norm();
    if (!(bnorm > 0.0)) throw std::invalid_argument("mu_star: b* is zero");
    double best = kInf;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << s); ++mask) {
        std::vector<Eigen::Index> keep;
        std::size_t removed = 0;
        for (std::size_t i = 0; i < s; ++i) {
            if (mask >> i & 1U)
                ++removed;
            else
                keep.push_back(true_support[i]);
        }
        double ratio = 1.0;
        if (!keep.empty()) {
            Eigen::MatrixXd Gk(G_star.rows(), static_cast<Eigen::Index>(keep.size()));
            for (std::size_t i = 0; i < keep.size(); ++i) Gk.col(static_cast<Eigen::Index>(i)) = G_star.col(keep[i]);
            const Eigen::VectorXd x = Gk.colPivHouseholderQr().solve(b_star);
            ratio = (b_star - Gk * x).norm() / bnorm;
        }
        best = std::min(best, ratio - static_cast<double>(removed + 1) / static_cast<double>(total_columns));
    }
    return best;
}

NormBoundsReport moment_norm_bounds_check(int p, double sigma) {
    NormBoundsReport r;
    r.p = p;
    r.sigma = sigma;
    const Eigen::MatrixXd A = gaussian_moment_block(p, sigma, 1);
    const Eigen::MatrixXd L = A - Eigen::MatrixXd::Identity(A.rows(), A.cols());
    r.norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
    r.norm_inf = A.cwiseAbs().rowwise().sum().maxCoeff();
    r.norm2 = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
    r.l_norm1 = L.cwiseAbs().colwise().sum().maxCoeff();
    const double x = sigma * sigma * binomial(p, 2);
    r.bound_a = std::exp(x);
    r.bound_l = x * std::exp(x);
    constexpr double slack = 1e-12;
    r.a_ok = r.norm1 <= r.bound_a * (1 + slack);
    r.l_applicable = x <= 1.0;
    r.l_ok = r.l_norm1 <= r.bound_l * (1 + slack) + slack;
    r.order_ok = r.norm2 <= r.norm1 * (1 + slack) && r.norm_inf <= r.norm1 * (1 + slack);
    return r;
}

}  // namespace wsindy

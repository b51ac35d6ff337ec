#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "wsindy/bias.hpp"
#include "wsindy/errors.hpp"
#include "wsindy/harness.hpp"
#include "wsindy/rng.hpp"

using namespace wsindy;
using testing_support::Gen;

namespace {

const NoiseLaw kGaussian{};

LibrarySpec plain_library(std::size_t n, int degree) {
    LibrarySpec lib;
    lib.state_dim = n;
    lib.poly_max_degree = degree;
    lib.operators = {{1}, {0}};
    return lib;
}

Eigen::Index column_of(const ColumnIndex& idx, std::vector<int> exponents, MultiIndex alpha = {0}) {
    const auto c = idx.find(alpha, {TrialFunction::Kind::monomial, std::move(exponents), {}});
    REQUIRE(c.has_value());
    return static_cast<Eigen::Index>(*c);
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Residual of projecting b onto the span of G's columns listed in keep, via the
// explicit projector built from the pseudo-inverse.
double residual_ratio(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const std::vector<int>& keep) {
    if (keep.empty()) return 1.0;
    Eigen::MatrixXd Gk(G.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) Gk.col(static_cast<Eigen::Index>(i)) = G.col(keep[i]);
    const Eigen::MatrixXd pinv = Gk.completeOrthogonalDecomposition().pseudoInverse();
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(G.rows(), G.rows()) - Gk * pinv;
    return (P * b).norm() / b.norm();
}

double brute_mu_star(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const Support& S, std::size_t total) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t s = S.size();
    for (std::size_t mask = 1; mask < (std::size_t{1} << s); ++mask) {
        std::vector<int> keep;
        std::size_t removed = 0;
        for (std::size_t i = 0; i < s; ++i) (mask >> i & 1U) ? ++removed : (keep.push_back(S[i]), 0U);
        best = std::min(best, residual_ratio(G, b, keep) - static_cast<double>(removed + 1) / total);
    }
    return best;
}

}  // namespace

TEST_CASE("binomials and double factorials") {
    CHECK(binomial(4, 2) == 6.0);
    CHECK(binomial(6, 0) == 1.0);
    CHECK(binomial(3, 5) == 0.0);
    CHECK(double_factorial(-1) == 1.0);
    CHECK(double_factorial(0) == 1.0);
    CHECK(double_factorial(5) == 15.0);
    CHECK(double_factorial(6) == 48.0);
}

TEST_CASE("univariate Gaussian block entries") {
    const Eigen::MatrixXd A = gaussian_moment_block(4, 1.0);
    CHECK(A(0, 4) == doctest::Approx(3.0));
    CHECK(A(2, 4) == doctest::Approx(6.0));
    CHECK(A(1, 3) == doctest::Approx(3.0));
    CHECK(A(0, 2) == doctest::Approx(1.0));
    const Eigen::MatrixXd B = gaussian_moment_block(7, 0.37);
    for (int i = 0; i <= 7; ++i) {
        CHECK(B(i, i) == 1.0);
        for (int j = 0; j < i; ++j) CHECK(B(i, j) == 0.0);
        for (int j = i + 1; j <= 7; j += 2) CHECK(B(i, j) == 0.0);
    }
    CHECK(gaussian_moment_block(5, 0.0) == Eigen::MatrixXd::Identity(6, 6));
}

TEST_CASE("bivariate block: x1^2 x2 carries sigma^2 x2") {
    const double sigma = 0.4;
    const Eigen::MatrixXd A = gaussian_moment_block(3, sigma, 2);
    const auto mons = graded_monomials(2, 3);
    auto pos = [&](std::vector<int> e) {
        return static_cast<Eigen::Index>(std::find(mons.begin(), mons.end(), e) - mons.begin());
    };
    CHECK(A(pos({0, 1}), pos({2, 1})) == doctest::Approx(sigma * sigma));
    CHECK(A(pos({2, 1}), pos({2, 1})) == 1.0);
    CHECK(A(pos({1, 1}), pos({2, 1})) == 0.0);
}

TEST_CASE("Monte Carlo: noisy monomials average to the predicted polynomial") {
    // Univariate and bivariate product-measure blocks against 10^7 Gaussian draws.
    const double sigma = 0.6;
    const std::size_t draws = 10000000;
    const CounterRng rng(2024);
    const Eigen::MatrixXd A1 = gaussian_moment_block(5, sigma, 1);
    const Eigen::MatrixXd A2 = gaussian_moment_block(3, sigma, 2);
    const auto mons = graded_monomials(2, 3);
    const std::vector<double> points{-1.3, -0.4, 0.0, 0.7, 1.9};
    const double u2 = -0.8;
    const Eigen::Index target = static_cast<Eigen::Index>(std::find(mons.begin(), mons.end(), std::vector<int>{2, 1}) -
                                                          mons.begin());

    for (double u : points) {
        std::vector<double> sum(6, 0.0), sum_sq(6, 0.0);
        double s2 = 0.0, s2_sq = 0.0;
        for (std::size_t k = 0; k < draws; ++k) {
            const double e1 = sigma * rng.normal(2 * k), e2 = sigma * rng.normal(2 * k + 1);
            double v = 1.0;
            for (int p = 0; p <= 5; ++p) {
                sum[p] += v;
                sum_sq[p] += v * v;
                v *= u + e1;
            }
            const double f = (u + e1) * (u + e1) * (u2 + e2);
            s2 += f;
            s2_sq += f * f;
        }
        const double n = static_cast<double>(draws);
        for (int p = 1; p <= 5; ++p) {
            const double mean = sum[p] / n;
            const double se = std::sqrt((sum_sq[p] / n - mean * mean) / n);
            double predicted = 0.0;
            for (int j = 0; j <= p; ++j) predicted += A1(j, p) * std::pow(u, j);
            CHECK(std::abs(mean - predicted) <= 4.0 * se + 1e-12);
        }
        double predicted = 0.0;
        for (std::size_t r = 0; r < mons.size(); ++r)
            predicted += A2(static_cast<Eigen::Index>(r), target) * std::pow(u, mons[r][0]) * std::pow(u2, mons[r][1]);
        const double mean = s2 / n;
        CHECK(std::abs(mean - predicted) <= 4.0 * std::sqrt((s2_sq / n - mean * mean) / n));
    }
}

TEST_CASE("Monte Carlo: noisy cosines shrink by the characteristic function") {
    const double sigma = 0.5, omega = 2.3;
    const CounterRng rng(77);
    const std::size_t draws = 10000000;
    for (double u : {-1.0, 0.2, 0.9}) {
        double s = 0.0, sq = 0.0;
        for (std::size_t k = 0; k < draws; ++k) {
            const double f = std::cos(omega * (u + sigma * rng.normal(k)));
            s += f;
            sq += f * f;
        }
        const double n = static_cast<double>(draws);
        const double mean = s / n, se = std::sqrt((sq / n - mean * mean) / n);
        CHECK(std::abs(mean - trig_multiplier({omega}, kGaussian, sigma) * std::cos(omega * u)) <= 4.0 * se);
    }
}

TEST_CASE("closed-form inverse is exact") {
    for (std::size_t n : {1, 2, 3})
        for (int p = 0; p <= 10; ++p)
            for (double sigma : {0.1, 0.5, 1.0}) {
                const Eigen::MatrixXd A = gaussian_moment_block(p, sigma, n);
                const Eigen::MatrixXd Ainv = gaussian_moment_inverse(p, sigma, n);
                const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
                const double row_sum_norm = (A * Ainv - I).cwiseAbs().rowwise().sum().maxCoeff();
                INFO("n=" << n << " p=" << p << " sigma=" << sigma);
                CHECK(row_sum_norm <= 1e-10);
            }
}

TEST_CASE("inverse of the cubic block and agreement with numerical inversion") {
    const double sigma = 0.3;
    CHECK(gaussian_moment_inverse(3, sigma)(1, 3) == doctest::Approx(-3.0 * sigma * sigma));
    for (std::size_t n : {1, 2}) {
        const Eigen::MatrixXd A = gaussian_moment_block(6, 0.7, n);
        const Eigen::MatrixXd numeric = A.fullPivLu().inverse();
        CHECK(max_abs(gaussian_moment_inverse(6, 0.7, n) - numeric) <= 1e-8 * max_abs(numeric));
    }
}

TEST_CASE("general recurrence") {
    // Symmetric law: odd factors vanish.
    const auto sym = general_moment_inverse_factor({1.0, 0.0, 0.2, 0.0, 0.1});
    CHECK(sym.f[1] == 0.0);
    CHECK(sym.f[3] == 0.0);

    // Gaussian moments reproduce the alternating signs.
    const auto gauss = general_moment_inverse_factor(kGaussian.moment_sequence(10, 0.8));
    for (std::size_t q = 0; q <= 10; q += 2) {
        const double sign = q / 2 % 2 ? -1.0 : 1.0;
        CHECK(std::signbit(gauss.f[q]) == std::signbit(sign));
        CHECK(gauss.f[q] == doctest::Approx(sign).epsilon(1e-12));
    }

    // Uniform on [-a, a]: factors rebuild the numerical inverse.
    const double a = 0.9;
    const NoiseLaw uniform{NoiseLaw::Kind::uniform, {}};
    const auto moments = uniform.moment_sequence(4, a / std::sqrt(3.0));
    CHECK(moments[2] == doctest::Approx(a * a / 3.0));
    CHECK(moments[4] == doctest::Approx(std::pow(a, 4) / 5.0));
    const auto fac = general_moment_inverse_factor(moments);
    const Eigen::MatrixXd A = moment_block(moments, 4);
    Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(5, 5);
    for (int i = 0; i <= 4; ++i)
        for (int j = i; j <= 4; ++j) rebuilt(i, j) = fac.f[static_cast<std::size_t>(j - i)] * A(i, j);
    CHECK(max_abs(rebuilt - A.inverse()) <= 1e-10);

    CHECK_THROWS_AS((void)general_moment_inverse_factor({2.0, 0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("general recurrence with an asymmetric custom law") {
    // Shifted two-point law: nonzero odd moments exercise every recurrence term.
    std::vector<double> moments{1.0};
    for (int k = 1; k <= 6; ++k) moments.push_back(0.5 * std::pow(0.3, k) + 0.5 * std::pow(-0.7, k));
    const auto fac = general_moment_inverse_factor(moments);
    const Eigen::MatrixXd A = moment_block(moments, 6);
    Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(7, 7);
    for (int i = 0; i <= 6; ++i)
        for (int j = i; j <= 6; ++j) rebuilt(i, j) = fac.f[static_cast<std::size_t>(j - i)] * A(i, j);
    CHECK(max_abs(rebuilt - A.inverse()) <= 1e-10);
}

TEST_CASE("trigonometric multipliers") {
    CHECK(trig_multiplier({0.0}, kGaussian, 0.7) == 1.0);
    const double omega = 3.0;
    CHECK(trig_multiplier({omega}, kGaussian, 0.14 / omega) >= 0.99);
    CHECK(trig_multiplier({1.0, 2.0}, kGaussian, 0.3) ==
          doctest::Approx(trig_multiplier({1.0}, kGaussian, 0.3) * trig_multiplier({2.0}, kGaussian, 0.3)));
    const double a = 0.5;
    const NoiseLaw uniform{NoiseLaw::Kind::uniform, {}};
    CHECK(std::abs(trig_multiplier({M_PI / a}, uniform, a / std::sqrt(3.0))) <= 1e-15);
    CHECK(trig_multiplier({1.0}, uniform, 0.2) == doctest::Approx(std::sin(0.2 * std::sqrt(3.0)) / (0.2 * std::sqrt(3.0))));
}

TEST_CASE("zero noise leaves coefficients unchanged") {
    const ColumnIndex idx(plain_library(2, 3));
    Gen gen(1);
    const Eigen::VectorXd w = gen.vector(static_cast<int>(idx.size()));
    const MomentMatrix mm = build_moment_matrix(idx, kGaussian, 0.0);
    CHECK(predict_continuum_coefficients(w, mm) == w);
    CHECK(generated_bias_terms(w, mm) == Eigen::VectorXd::Zero(w.size()));
}

TEST_CASE("cubic model: continuum coefficients of the linear terms") {
    // u1' = 2 u1^3 - 0.1 u2^3 in a cubic library over two states.
    const ColumnIndex idx(plain_library(2, 3));
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    w[column_of(idx, {3, 0})] = 2.0;
    w[column_of(idx, {0, 3})] = -0.1;
    const double sigma = 0.2;
    const Eigen::VectorXd bar = predict_continuum_coefficients(w, build_moment_matrix(idx, kGaussian, sigma));
    CHECK(bar[column_of(idx, {1, 0})] == doctest::Approx(-6.0 * sigma * sigma));
    CHECK(bar[column_of(idx, {0, 1})] == doctest::Approx(0.3 * sigma * sigma));
    CHECK(bar[column_of(idx, {3, 0})] == doctest::Approx(2.0));
    CHECK(bar[column_of(idx, {2, 1})] == 0.0);
}

TEST_CASE("Burgers-type model: generated linear and constant terms") {
    const ColumnIndex idx(plain_library(1, 4));
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    w[column_of(idx, {3})] = -1.0;
    w[column_of(idx, {2})] = 2.0;
    const double sigma = 0.15;
    const Eigen::VectorXd gen_terms = generated_bias_terms(w, build_moment_matrix(idx, kGaussian, sigma));
    CHECK(gen_terms[column_of(idx, {1})] == doctest::Approx(-3.0 * sigma * sigma));
    CHECK(gen_terms[column_of(idx, {0})] == doctest::Approx(2.0 * sigma * sigma));
    CHECK(gen_terms[column_of(idx, {2})] == 0.0);
}

TEST_CASE("vanishing multiplier makes the bias singular") {
    LibrarySpec lib = plain_library(1, 1);
    const double a = 0.5;
    lib.trig_frequencies = {{M_PI / a}};
    const ColumnIndex idx(lib);
    const MomentMatrix mm = build_moment_matrix(idx, {NoiseLaw::Kind::uniform, {}}, a / std::sqrt(3.0));
    CHECK_FALSE(mm.invertible);
    CHECK_THROWS_AS((void)predict_continuum_coefficients(Eigen::VectorXd::Ones(4), mm), SingularBiasError);
}

TEST_CASE("derivative-only quadratics carry no bias") {
    // In hyper-KS every nonlinearity sits under a derivative, so the sigma^2
    // constants vanish and the continuum model equals the true one.
    const SystemPreset preset = system_preset(SystemKind::hyper_ks);
    const ColumnIndex idx(preset.library);
    const Eigen::VectorXd w = preset.true_weights(idx).col(0);
    for (double sigma : {0.1, 0.5, 2.0}) {
        const Eigen::VectorXd bar = predict_continuum_coefficients(w, build_moment_matrix(idx, kGaussian, sigma));
        CHECK(max_abs(bar - w) <= 1e-12);
    }
}

TEST_CASE("critical noise brackets") {
    const ColumnIndex idx(plain_library(1, 5));
    Eigen::VectorXd linear = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    linear[column_of(idx, {1})] = -2.0;
    CHECK(critical_noise_bounds(linear, idx).unconditional);

    Eigen::VectorXd cubic = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    cubic[column_of(idx, {3})] = 1.5;
    cubic[column_of(idx, {1})] = -1.5;
    const CriticalNoiseBounds b = critical_noise_bounds(cubic, idx);
    CHECK_FALSE(b.unconditional);
    CHECK(b.degree == 3);
    CHECK(b.lower_sq == doctest::Approx(1.0 / (6.0 * M_E)));
    CHECK(b.upper_sq == doctest::Approx(1.0 / 3.0));

    const SystemPreset hks = system_preset(SystemKind::hyper_ks);
    const ColumnIndex hidx(hks.library);
    CHECK(critical_noise_bounds(hks.true_weights(hidx).col(0), hidx).unconditional);

    CHECK_THROWS_AS((void)critical_noise_bounds(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size())), idx),
                    std::invalid_argument);
}

TEST_CASE("one-shot critical bracket with an orthonormal system") {
    const ColumnIndex idx(plain_library(1, 3));
    const auto J = static_cast<Eigen::Index>(idx.size());
    Gen gen(12);
    const Eigen::MatrixXd Q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(gen.matrix(30, static_cast<int>(J))).householderQ() *
        Eigen::MatrixXd::Identity(30, J);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(J);
    w[column_of(idx, {3})] = 0.8;
    const CriticalNoiseBounds b = mstls_critical_bounds(Q, w, idx);
    CHECK(b.lower_sq == doctest::Approx(1.0 / (3.0 * M_E) * std::min(1.0 / static_cast<double>(J), 0.5)));
    CHECK(b.upper_sq == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("property: critical brackets are ordered") {
    Gen gen(13);
    const ColumnIndex idx(plain_library(2, 4));
    const auto J = static_cast<int>(idx.size());
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::VectorXd w = gen.sparse_vector(J, gen.integer(1, 5), 0.01, 5.0);
        const CriticalNoiseBounds b = critical_noise_bounds(w, idx);
        CHECK(b.lower_sq <= b.upper_sq);
        const CriticalNoiseBounds m = mstls_critical_bounds(gen.matrix(40, J), w, idx);
        CHECK(m.lower_sq <= m.upper_sq);
    }
}

TEST_CASE("cubic flip point") {
    const ColumnIndex idx(plain_library(2, 3));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), 1);
    w(column_of(idx, {3, 0}), 0) = 2.0;
    w(column_of(idx, {0, 3}), 0) = -0.1;
    const auto flip = exact_flip_sigma(w.col(0), idx);
    REQUIRE(flip.has_value());
    CHECK(*flip == doctest::Approx(std::sqrt(0.1 / 6.0)).epsilon(1e-8));

    Eigen::VectorXd linear = Eigen::VectorXd::Zero(w.rows());
    linear[column_of(idx, {1, 0})] = 1.0;
    CHECK_FALSE(exact_flip_sigma(linear, idx).has_value());
}

TEST_CASE("mu* with two equal orthonormal terms") {
    Gen gen(21);
    const Eigen::MatrixXd Q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(gen.matrix(40, 20)).householderQ() * Eigen::MatrixXd::Identity(40, 20);
    const Eigen::VectorXd b = 1.7 * (Q.col(3) + Q.col(11));
    const double mu = mu_star(Q, b, {3, 11}, 20);
    CHECK(mu == doctest::Approx(1.0 / std::sqrt(2.0) - 2.0 / 20.0));
    CHECK(mu == doctest::Approx(brute_mu_star(Q, b, {3, 11}, 20)).epsilon(1e-12));
}

TEST_CASE("mu* when b lies along one retained column") {
    Gen gen(22);
    const Eigen::MatrixXd G = gen.matrix(25, 6);
    const Eigen::VectorXd b = G.col(2);
    // Removing only columns other than 2 leaves b fully explained; the loss is all complexity.
    const double mu = mu_star(G, b, {0, 2, 4}, 6);
    CHECK(mu == doctest::Approx(brute_mu_star(G, b, {0, 2, 4}, 6)).epsilon(1e-10));
    CHECK(mu <= 0.0 - 2.0 / 6.0 + 1e-12);
}

TEST_CASE("property: mu* matches brute-force projections") {
    Gen gen(23);
    for (int trial = 0; trial < 40; ++trial) {
        const int cols = gen.integer(3, 10);
        const Eigen::MatrixXd G = gen.matrix(cols + gen.integer(1, 20), cols);
        const int s = gen.integer(1, std::min(cols, 6));
        const Eigen::VectorXd w = gen.sparse_vector(cols, s, 0.1, 2.0);
        const Support S = support_of(w);
        const Eigen::VectorXd b = G * w;
        const std::size_t total = static_cast<std::size_t>(cols + gen.integer(0, 50));
        CHECK(mu_star(G, b, S, total) == doctest::Approx(brute_mu_star(G, b, S, total)).epsilon(1e-9).scale(1e-9));
        // More columns in the library only lowers the complexity penalty.
        CHECK(mu_star(G, b, S, 2 * total) >= mu_star(G, b, S, total));
    }
}

TEST_CASE("mu* rejects oversized or empty enumerations") {
    Gen gen(24);
    const Eigen::MatrixXd G = gen.matrix(30, 25);
    Support big(21);
    for (int i = 0; i < 21; ++i) big[static_cast<std::size_t>(i)] = i;
    CHECK_THROWS_AS((void)mu_star(G, G.col(0), big, 25), BudgetError);
    CHECK_THROWS_AS((void)mu_star(G, G.col(0), {}, 25), std::invalid_argument);
}

TEST_CASE("moment norm bounds") {
    const NormBoundsReport zero = moment_norm_bounds_check(5, 0.0);
    CHECK(zero.l_norm1 == 0.0);
    CHECK(zero.l_ok);
    const NormBoundsReport edge = moment_norm_bounds_check(6, std::sqrt(1.0 / 15.0));
    CHECK(edge.l_applicable);
    CHECK(edge.a_ok);
    CHECK(edge.l_ok);
    CHECK(edge.norm1 <= edge.bound_a);
    const NormBoundsReport mid = moment_norm_bounds_check(4, 0.3);
    CHECK(mid.norm2 <= mid.norm1);
    CHECK(mid.order_ok);
    for (int p = 1; p <= 10; ++p)
        for (double frac : {0.1, 0.5, 1.0}) {
            const NormBoundsReport r = moment_norm_bounds_check(p, std::sqrt(frac / binomial(std::max(p, 2), 2)));
            CHECK(r.a_ok);
            CHECK(r.l_ok);
            CHECK(r.order_ok);
        }
}

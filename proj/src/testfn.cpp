#include "wsindy/testfn.hpp"

#include <cmath>
#include <stdexcept>

namespace wsindy {

namespace {

using Poly = std::vector<double>;

Poly derivative(const Poly& p) {
    if (p.size() <= 1) return {0.0};
    Poly d(p.size() - 1);
    for (std::size_t i = 1; i < p.size(); ++i) d[i - 1] = static_cast<double>(i) * p[i];
    return d;
}

Poly multiply(const Poly& a, const Poly& b) {
    Poly r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

Poly add(Poly a, const Poly& b) {
    if (b.size() > a.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

double horner(const Poly& p, double v) {
    double r = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) r = r * v + p[i];
    return r;
}

}  // namespace

BumpFunction::BumpFunction(double shape_constant, int max_order) : c_(shape_constant) {
    if (max_order < 0) throw std::invalid_argument("BumpFunction: negative max order");
    // With s = v^2 - 1 and phi^(k) = P_k s^(-2k) phi:
    //   P_{k+1} = s^2 P_k' - 4k v s P_k - 2c v P_k.
    const Poly s{-1.0, 0.0, 1.0};
    const Poly s2 = multiply(s, s);
    const Poly vs{0.0, -1.0, 0.0, 1.0};
    poly_.push_back({1.0});
    for (int k = 0; k < max_order; ++k) {
        const Poly& p = poly_.back();
        Poly next = multiply(s2, derivative(p));
        Poly t1 = multiply(vs, p);
        for (double& x : t1) x *= -4.0 * k;
        Poly t2 = multiply(Poly{0.0, 1.0}, p);
        for (double& x : t2) x *= -2.0 * c_;
        poly_.push_back(add(add(std::move(next), t1), t2));
    }
}

double BumpFunction::eval(int k, double v) const {
    if (k < 0 || k > max_order()) throw std::out_of_range("BumpFunction: derivative order out of range");
    const double gap = 1.0 - v * v;
    if (gap < 1e-10) return 0.0;
    // phi^(k) = P_k(v) * exp(c/s - 2k log|s|), evaluated in log form to avoid overflow.
    const double s = -gap;
    const double log_scale = c_ / s - 2.0 * k * std::log(gap);
    return horner(poly_[k], v) * std::exp(log_scale);
}

double bump_eval(int k, double v) {
    static const BumpFunction standard(9.0, 16);
    return standard.eval(k, v);
}

std::size_t support_size(const std::vector<int>& radii) {
    std::size_t m = 1;
    for (int r : radii) m *= static_cast<std::size_t>(2 * r + 1);
    return m;
}

std::size_t support_size(const Stencil& stencil) { return support_size(stencil.radii); }

std::vector<int> radii_for_fraction(const Grid& grid, const std::vector<double>& fraction) {
    if (fraction.size() != grid.dims()) throw std::invalid_argument("radii_for_fraction: one fraction per axis");
    std::vector<int> r;
    for (std::size_t q = 0; q < grid.dims(); ++q) {
        if (!(fraction[q] > 0.0 && fraction[q] <= 1.0))
            throw std::invalid_argument("radii_for_fraction: fraction must lie in (0, 1]");
        const double half = 0.5 * fraction[q] * static_cast<double>(grid.counts[q] - 1);
        r.push_back(static_cast<int>(std::floor(half + 1e-9)));
    }
    return r;
}

Stencil build_stencil(const Grid& grid, const std::vector<int>& radii, const std::vector<int>& alpha,
                      const BumpFunction& bump) {
    const std::size_t D = grid.dims();
    if (radii.size() != D || alpha.size() != D)
        throw std::invalid_argument("build_stencil: radii and alpha need one entry per axis");
    Stencil st{alpha, radii, {}, {}};
    for (std::size_t q = 0; q < D; ++q) {
        const int r = radii[q];
        if (r < 0 || alpha[q] < 0) throw std::invalid_argument("build_stencil: negative radius or order");
        if (static_cast<std::size_t>(2 * r + 1) > grid.counts[q])
            throw std::invalid_argument("build_stencil: stencil larger than grid");
        const double h = grid.resolution[q];
        std::vector<double> f(2 * r + 1, 0.0);
        if (r > 0) {
            const double half_width = r * h;
            const double chain = std::pow(half_width, -alpha[q]);
            for (int o = -r; o <= r; ++o) f[o + r] = bump.eval(alpha[q], static_cast<double>(o) / r) * chain * h;
        } else {
            // A single point carries no derivative information.
            f[0] = alpha[q] == 0 ? h : 0.0;
        }
        st.factors.push_back(std::move(f));
    }
    st.weights.assign(support_size(radii), 1.0);
    std::size_t block = st.weights.size();
    for (std::size_t q = 0; q < D; ++q) {
        const auto& f = st.factors[q];
        block /= f.size();
        for (std::size_t i = 0; i < st.weights.size(); ++i) st.weights[i] *= f[(i / block) % f.size()];
    }
    return st;
}

Stencil build_stencil(const Grid& grid, const std::vector<int>& radii, const std::vector<int>& alpha) {
    static const BumpFunction standard(9.0, 16);
    return build_stencil(grid, radii, alpha, standard);
}

}  // namespace wsindy

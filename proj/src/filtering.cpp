#include "wsindy/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wsindy {

namespace {

// Half-sample symmetric index: ... 1 0 | 0 1 ... N-1 | N-1 N-2 ...
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    const auto N = static_cast<std::ptrdiff_t>(n);
    const std::ptrdiff_t period = 2 * N;
    std::ptrdiff_t k = i % period;
    if (k < 0) k += period;
    return static_cast<std::size_t>(k < N ? k : period - 1 - k);
}

// Running-sum box filter along one axis of a strided line.
void box_line(const double* in, double* out, std::size_t n, std::size_t stride, int width) {
    const int r = width / 2;
    double sum = 0.0;
    for (int o = -r; o <= r; ++o) sum += in[reflect(o, n) * stride];
    for (std::size_t i = 0; i < n; ++i) {
        out[i * stride] = sum / width;
        const auto ii = static_cast<std::ptrdiff_t>(i);
        sum += in[reflect(ii + r + 1, n) * stride] - in[reflect(ii - r, n) * stride];
    }
}

}  // namespace

std::size_t FilterSpec::total_width() const {
    std::size_t m = 1;
    for (int w : widths) m *= static_cast<std::size_t>(w);
    return m;
}

void FilterSpec::validate() const {
    for (int w : widths)
        if (w < 1 || w % 2 == 0) throw std::invalid_argument("filter widths must be odd and >= 1");
}

std::vector<double> moving_average_1d(const std::vector<double>& x, int width) {
    if (width < 1 || width % 2 == 0) throw std::invalid_argument("moving_average_1d: width must be odd and >= 1");
    if (static_cast<std::size_t>(width) > x.size())
        throw std::invalid_argument("moving_average_1d: width exceeds series");
    std::vector<double> out(x.size());
    if (width == 1) return x;
    box_line(x.data(), out.data(), x.size(), 1, width);
    return out;
}

Dataset moving_average(const Dataset& data, const FilterSpec& spec) {
    data.validate();
    spec.validate();
    const Grid& g = data.grid;
    if (spec.widths.size() != g.dims()) throw std::invalid_argument("moving_average: one width per axis");
    for (std::size_t q = 0; q < g.dims(); ++q)
        if (static_cast<std::size_t>(spec.widths[q]) > g.counts[q])
            throw std::invalid_argument("moving_average: width exceeds axis length");

    Dataset out = data;
    std::vector<double> tmp(data.values.size());
    const auto strides = g.strides();
    const std::size_t sd = data.state_dim;
    for (std::size_t q = 0; q < g.dims(); ++q) {
        const int w = spec.widths[q];
        if (w == 1) continue;
        const std::size_t n = g.counts[q];
        const std::size_t stride = strides[q] * sd;
        // Every line along axis q: iterate over all start offsets with index_q = 0.
        const std::size_t outer = g.num_points() / (n * strides[q]);
        for (std::size_t a = 0; a < outer; ++a)
            for (std::size_t b = 0; b < strides[q]; ++b)
                for (std::size_t c = 0; c < sd; ++c) {
                    const std::size_t base = (a * n * strides[q] + b) * sd + c;
                    box_line(out.values.data() + base, tmp.data() + base, n, stride, w);
                }
        out.values.swap(tmp);
    }
    out.metadata["filter_widths"] = [&] {
        std::string s;
        for (std::size_t q = 0; q < spec.widths.size(); ++q) s += (q ? "," : "") + std::to_string(spec.widths[q]);
        return s;
    }();
    return out;
}

const std::vector<double>& annihilating_stencil() {
    static const std::vector<double> f = [] {
        std::vector<double> v{1, -6, 15, -20, 15, -6, 1};
        const double norm = std::sqrt(924.0);
        for (double& x : v) x /= norm;
        return v;
    }();
    return f;
}

NoiseEstimate estimate_sigma(const Dataset& data) {
    data.validate();
    const Grid& g = data.grid;
    const auto& f = annihilating_stencil();
    const auto strides = g.strides();
    const std::size_t sd = data.state_dim;
    NoiseEstimate est;
    for (std::size_t q = 0; q < g.dims(); ++q) {
        const std::size_t n = g.counts[q];
        if (n < f.size()) throw std::invalid_argument("estimate_sigma: every axis needs at least 7 points");
        const std::size_t stride = strides[q] * sd;
        const std::size_t outer = g.num_points() / (n * strides[q]);
        double ss = 0.0;
        std::size_t count = 0;
        for (std::size_t a = 0; a < outer; ++a)
            for (std::size_t b = 0; b < strides[q]; ++b)
                for (std::size_t c = 0; c < sd; ++c) {
                    const double* line = data.values.data() + (a * n * strides[q] + b) * sd + c;
                    for (std::size_t i = 0; i + f.size() <= n; ++i) {
                        double v = 0.0;
                        for (std::size_t k = 0; k < f.size(); ++k) v += f[k] * line[(i + k) * stride];
                        ss += v * v;
                        ++count;
                    }
                }
        est.per_axis.push_back(std::sqrt(ss / static_cast<double>(count)));
    }
    std::vector<double> sorted = est.per_axis;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = sorted.size();
    est.sigma_est = k % 2 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
    return est;
}

std::vector<int> filter_width_heuristic(double sigma_est, int p_max, double tau_star, int d, std::size_t m) {
    if (!(tau_star > 0.0 && tau_star <= 1.0))
        throw std::invalid_argument("filter_width_heuristic: tau* must lie in (0, 1]");
    if (d < 0 || sigma_est < 0.0) throw std::invalid_argument("filter_width_heuristic: bad arguments");
    const double dim = d + 1.0;
    const double c2 = p_max >= 2 ? 0.5 * p_max * (p_max - 1) : 0.0;
    const double bias_side = 2.0 * std::pow(c2 * sigma_est * sigma_est / tau_star, 1.0 / dim);
    const double cap = std::pow(static_cast<double>(m), 1.0 / dim) / 2.0;
    int w = static_cast<int>(std::floor(std::min(bias_side, cap)));
    if (w % 2 == 0) --w;
    w = std::max(w, 1);
    return std::vector<int>(static_cast<std::size_t>(d + 1), w);
}

double smaf_root(double c) {
    if (c < 0.0) throw std::invalid_argument("smaf_root: negative constant");
    auto p = [c](double n) { return n * n * n * n * n - n * n * n - c; };
    double lo = 1.0;
    double hi = 2.0 * std::max(1.0, std::cbrt(c));
    if (p(lo) >= 0.0) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (p(mid) < 0.0 ? lo : hi) = mid;
    }
    // Snap to an exact integer root if bisection landed next to one.
    const double r = std::round(hi);
    if (std::abs(hi - r) < 1e-9 && p(r) == 0.0) return r;
    return hi;
}

AdaptiveWidth adaptive_smaf_width(const std::vector<double>& series, double sigma_est, double h, double gamma,
                                  double tau, int n_max, int n_init) {
    if (!(gamma > 1.0) || !(tau > 0.0) || n_max < 3 || !(h > 0.0))
        throw std::invalid_argument("adaptive_smaf_width: bad parameters");
    AdaptiveWidth out;
    auto clamp_odd = [n_max](int n) {
        n = std::clamp(n, 3, n_max);
        if (n % 2 == 0) n = n + 1 <= n_max ? n + 1 : n - 1;
        return n;
    };
    int n = clamp_odd(n_init);
    out.history.push_back(n);
    const std::size_t N = series.size();
    for (int it = 0; it < 20; ++it) {
        // Quadratic coefficient of a centered least-squares fit on each window:
        // by symmetry a2 = sum (x^2 - mean x^2) y / sum (x^2 - mean x^2)^2.
        int len = static_cast<int>(std::ceil(gamma * n));
        if (len % 2 == 0) ++len;
        len = std::max(len, 3);
        if (static_cast<std::size_t>(len) > N) len = static_cast<int>(N % 2 ? N : N - 1);
        if (len < 3) throw std::invalid_argument("adaptive_smaf_width: series too short");
        const int r = len / 2;
        std::vector<double> wts(static_cast<std::size_t>(len));
        double mean_x2 = 0.0;
        for (int o = -r; o <= r; ++o) mean_x2 += (o * h) * (o * h);
        mean_x2 /= len;
        double denom = 0.0;
        for (int o = -r; o <= r; ++o) {
            const double z = (o * h) * (o * h) - mean_x2;
            wts[static_cast<std::size_t>(o + r)] = z;
            denom += z * z;
        }
        double sum_abs = 0.0;
        std::size_t count = 0;
        for (std::size_t i = static_cast<std::size_t>(r); i + static_cast<std::size_t>(r) < N; ++i) {
            double a2 = 0.0;
            for (int o = -r; o <= r; ++o) a2 += wts[static_cast<std::size_t>(o + r)] * series[i + o];
            sum_abs += std::abs(a2 / denom);
            ++count;
        }
        const double dcurv = 2.0 * sum_abs / static_cast<double>(count);
        const double L = (dcurv + tau) * (dcurv + tau) * std::pow(h, 4) / 144.0;
        const double root = smaf_root(sigma_est * sigma_est / L);
        const int next = clamp_odd(static_cast<int>(std::ceil(root - 1e-12)));
        out.iterations = it + 1;
        const bool repeat = std::find(out.history.begin(), out.history.end(), next) != out.history.end();
        out.history.push_back(next);
        n = next;
        if (repeat) {
            out.fixed_point = out.history[out.history.size() - 2] == next;
            break;
        }
    }
    out.width = n;
    return out;
}

}  // namespace wsindy

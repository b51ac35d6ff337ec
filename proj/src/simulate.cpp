#include "wsindy/simulate.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <fftw3.h>
#include <boost/numeric/odeint.hpp>

#include "wsindy/errors.hpp"

namespace wsindy {

namespace {

using cplx = std::complex<double>;
namespace odeint = boost::numeric::odeint;

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

template <std::size_t N, typename Rhs>
Dataset integrate_ode(const SimConfig& cfg, Rhs rhs, const char* name) {
    if (cfg.initial_state.size() != N)
        throw std::invalid_argument(std::string(name) + ": initial state has wrong length");
    if (cfg.time_points < 2 || !(cfg.t_final > 0.0)) throw std::invalid_argument(std::string(name) + ": bad time grid");
    using State = std::array<double, N>;
    State x{};
    std::copy(cfg.initial_state.begin(), cfg.initial_state.end(), x.begin());

    Dataset d;
    d.grid = make_grid({{0.0, cfg.t_final}}, {cfg.time_points});
    d.state_dim = N;
    d.values.resize(cfg.time_points * N);
    std::vector<double> times(cfg.time_points);
    for (std::size_t i = 0; i < times.size(); ++i) times[i] = d.grid.coordinate(0, i);
    times.back() = cfg.t_final;

    auto system = [&](const State& u, State& du, double) { du = rhs(u); };
    std::size_t k = 0;
    auto observe = [&](const State& u, double) {
        for (std::size_t c = 0; c < N; ++c) {
            if (!std::isfinite(u[c])) throw SimulationError(std::string(name) + ": non-finite state");
            d.values[k * N + c] = u[c];
        }
        ++k;
    };
    auto stepper = odeint::make_dense_output(cfg.abs_tol, cfg.rel_tol, odeint::runge_kutta_dopri5<State>());
    try {
        odeint::integrate_times(stepper, system, x, times.begin(), times.end(), 1e-4, observe);
    } catch (const odeint::step_adjustment_error& e) {
        throw SimulationError(std::string(name) + ": " + e.what());
    } catch (const odeint::no_progress_error& e) {
        throw SimulationError(std::string(name) + ": " + e.what());
    }
    if (k != cfg.time_points) throw SimulationError(std::string(name) + ": integrator stopped early");
    d.metadata["system"] = name;
    d.metadata["initial_state"] = join(cfg.initial_state);
    d.metadata["integrator"] = "dopri5 dense output";
    return d;
}

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Real periodic field on N points with r2c/c2r transforms and a 2x padded
// grid for products. Spectral coefficients are normalized by N.
class PeriodicSpectral {
public:
    PeriodicSpectral(std::size_t n, double length) : n_(n), m_(2 * n), length_(length) {
        if (n < 8 || n % 2) throw std::invalid_argument("spectral grid size must be even and >= 8");
        real_n_ = fftw_alloc_real(n_);
        real_m_ = fftw_alloc_real(m_);
        spec_n_ = fftw_alloc_complex(n_ / 2 + 1);
        spec_m_ = fftw_alloc_complex(m_ / 2 + 1);
        std::lock_guard lock(fftw_planner_mutex());
        fwd_n_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_n_, spec_n_, FFTW_ESTIMATE);
        inv_n_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spec_n_, real_n_, FFTW_ESTIMATE);
        fwd_m_ = fftw_plan_dft_r2c_1d(static_cast<int>(m_), real_m_, spec_m_, FFTW_ESTIMATE);
        inv_m_ = fftw_plan_dft_c2r_1d(static_cast<int>(m_), spec_m_, real_m_, FFTW_ESTIMATE);
    }
    PeriodicSpectral(const PeriodicSpectral&) = delete;
    PeriodicSpectral& operator=(const PeriodicSpectral&) = delete;
    ~PeriodicSpectral() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_n_);
        fftw_destroy_plan(inv_n_);
        fftw_destroy_plan(fwd_m_);
        fftw_destroy_plan(inv_m_);
        fftw_free(real_n_);
        fftw_free(real_m_);
        fftw_free(spec_n_);
        fftw_free(spec_m_);
    }

    [[nodiscard]] std::size_t modes() const noexcept { return n_ / 2 + 1; }
    [[nodiscard]] double wavenumber(std::size_t j) const noexcept {
        return 2.0 * std::numbers::pi * static_cast<double>(j) / length_;
    }

    std::vector<cplx> forward(const std::vector<double>& u) {
        std::copy(u.begin(), u.end(), real_n_);
        fftw_execute(fwd_n_);
        std::vector<cplx> out(modes());
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] = cplx(spec_n_[j][0], spec_n_[j][1]) / static_cast<double>(n_);
        return out;
    }

    std::vector<double> inverse(const std::vector<cplx>& v) {
        for (std::size_t j = 0; j < modes(); ++j) {
            spec_n_[j][0] = v[j].real();
            spec_n_[j][1] = v[j].imag();
        }
        fftw_execute(inv_n_);
        return {real_n_, real_n_ + n_};
    }

    // Physical values on the padded grid.
    const double* pad_to_physical(const std::vector<cplx>& v) {
        for (std::size_t j = 0; j < m_ / 2 + 1; ++j) spec_m_[j][0] = spec_m_[j][1] = 0.0;
        for (std::size_t j = 0; j + 1 < modes(); ++j) {  // Nyquist mode dropped
            spec_m_[j][0] = v[j].real();
            spec_m_[j][1] = v[j].imag();
        }
        fftw_execute(inv_m_);
        return real_m_;
    }

    // Coefficients (normalized, truncated to N modes) of a padded-grid field.
    std::vector<cplx> padded_to_spectral(const std::vector<double>& w) {
        std::copy(w.begin(), w.end(), real_m_);
        fftw_execute(fwd_m_);
        std::vector<cplx> out(modes());
        for (std::size_t j = 0; j + 1 < modes(); ++j)
            out[j] = cplx(spec_m_[j][0], spec_m_[j][1]) / static_cast<double>(m_);
        return out;
    }

    [[nodiscard]] std::size_t padded_size() const noexcept { return m_; }

private:
    std::size_t n_, m_;
    double length_;
    double* real_n_;
    double* real_m_;
    fftw_complex* spec_n_;
    fftw_complex* spec_m_;
    fftw_plan fwd_n_, inv_n_, fwd_m_, inv_m_;
};

// Fourth-order exponential time differencing with contour-integral coefficients.
class Etdrk4 {
public:
    using Nonlinear = std::function<std::vector<cplx>(const std::vector<cplx>&)>;

    Etdrk4(const std::vector<double>& linear, double h, Nonlinear nonlinear)
        : n_(linear.size()), nonlinear_(std::move(nonlinear)) {
        constexpr int kContour = 64;
        e_.resize(n_);
        e2_.resize(n_);
        q_.resize(n_);
        f1_.resize(n_);
        f2_.resize(n_);
        f3_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double hl = h * linear[j];
            e_[j] = std::exp(hl);
            e2_[j] = std::exp(hl / 2);
            cplx q = 0, a = 0, b = 0, c = 0;
            for (int r = 0; r < kContour; ++r) {
                const cplx z = hl + std::exp(cplx(0, std::numbers::pi * (r + 0.5) / kContour));
                const cplx ez = std::exp(z);
                q += (std::exp(z / 2.0) - 1.0) / z;
                a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / (z * z * z);
                b += (2.0 + z + ez * (-2.0 + z)) / (z * z * z);
                c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / (z * z * z);
            }
            q_[j] = h * (q / double(kContour)).real();
            f1_[j] = h * (a / double(kContour)).real();
            f2_[j] = h * (b / double(kContour)).real();
            f3_[j] = h * (c / double(kContour)).real();
        }
    }

    void step(std::vector<cplx>& v) const {
        const auto nv = nonlinear_(v);
        std::vector<cplx> a(n_), b(n_), c(n_);
        for (std::size_t j = 0; j < n_; ++j) a[j] = e2_[j] * v[j] + q_[j] * nv[j];
        const auto na = nonlinear_(a);
        for (std::size_t j = 0; j < n_; ++j) b[j] = e2_[j] * v[j] + q_[j] * na[j];
        const auto nb = nonlinear_(b);
        for (std::size_t j = 0; j < n_; ++j) c[j] = e2_[j] * a[j] + q_[j] * (2.0 * nb[j] - nv[j]);
        const auto nc = nonlinear_(c);
        for (std::size_t j = 0; j < n_; ++j)
            v[j] = e_[j] * v[j] + nv[j] * f1_[j] + 2.0 * (na[j] + nb[j]) * f2_[j] + nc[j] * f3_[j];
    }

private:
    std::size_t n_;
    Nonlinear nonlinear_;
    std::vector<double> e_, e2_, q_, f1_, f2_, f3_;
};

// Integrates u_t = L u + N(u) on a periodic domain and records (x, t) snapshots.
Dataset run_pde(const SimConfig& cfg, const std::function<double(double)>& symbol,
                const std::function<std::vector<cplx>(PeriodicSpectral&, const std::vector<cplx>&)>& nonlinear,
                const std::vector<double>& u0, const char* name) {
    const std::size_t N = cfg.space_points;
    const double length = cfg.x_max - cfg.x_min;
    PeriodicSpectral sp(N, length);
    const std::size_t modes = sp.modes();
    std::vector<double> lin(modes);
    for (std::size_t j = 0; j < modes; ++j) lin[j] = symbol(sp.wavenumber(j));
    const std::size_t cutoff = cfg.dealias ? N / 3 : N / 2 - 1;

    const double dt_out = cfg.t_final / static_cast<double>(cfg.time_points - 1);
    const int sub = cfg.substeps > 0 ? cfg.substeps : 8;
    const double h = dt_out / sub;
    auto nl = [&](const std::vector<cplx>& v) {
        auto out = nonlinear(sp, v);
        for (std::size_t j = cutoff + 1; j < modes; ++j) out[j] = 0.0;
        return out;
    };
    const Etdrk4 integrator(lin, h, nl);

    std::vector<cplx> v = sp.forward(u0);
    for (std::size_t j = cutoff + 1; j < modes; ++j) v[j] = 0.0;
    auto check = [&](const std::vector<double>& u, double t) {
        for (double x : u)
            if (!std::isfinite(x)) {
                std::ostringstream os;
                os << name << ": non-finite solution at t = " << t;
                throw SimulationError(os.str());
            }
    };
    if (cfg.burn_in > 0.0) {
        const auto steps = static_cast<long>(std::ceil(cfg.burn_in / h));
        const Etdrk4 burn(lin, cfg.burn_in / static_cast<double>(steps), nl);
        for (long s = 0; s < steps; ++s) burn.step(v);
    }

    Dataset d;
    d.grid =
        make_grid({{cfg.x_min, cfg.x_max - length / static_cast<double>(N)}, {0.0, cfg.t_final}}, {N, cfg.time_points});
    d.grid.resolution[0] = length / static_cast<double>(N);
    d.state_dim = 1;
    d.values.resize(N * cfg.time_points);
    const std::size_t T = cfg.time_points;
    for (std::size_t it = 0; it < T; ++it) {
        if (it > 0)
            for (int s = 0; s < sub; ++s) integrator.step(v);
        const auto u = sp.inverse(v);
        check(u, static_cast<double>(it) * dt_out);
        for (std::size_t ix = 0; ix < N; ++ix) d.values[ix * T + it] = u[ix];
    }
    d.metadata["system"] = name;
    d.metadata["integrator"] = "etdrk4 pseudo-spectral";
    d.metadata["substeps"] = std::to_string(sub);
    d.metadata["dealias"] = cfg.dealias ? "2/3" : "none";
    return d;
}

}  // namespace

SystemKind parse_system(const std::string& name) {
    if (name == "lorenz") return SystemKind::lorenz;
    if (name == "cubic_oscillator" || name == "cubic") return SystemKind::cubic_oscillator;
    if (name == "burgers_nl" || name == "burgers") return SystemKind::burgers_nl;
    if (name == "hyper_ks" || name == "hks") return SystemKind::hyper_ks;
    throw std::invalid_argument("unknown system '" + name + "'");
}

const char* to_string(SystemKind kind) noexcept {
    switch (kind) {
        case SystemKind::lorenz:
            return "lorenz";
        case SystemKind::cubic_oscillator:
            return "cubic_oscillator";
        case SystemKind::burgers_nl:
            return "burgers_nl";
        case SystemKind::hyper_ks:
            return "hyper_ks";
    }
    return "unknown";
}

SimConfig default_sim_config(SystemKind system) {
    SimConfig c;
    c.system = system;
    switch (system) {
        case SystemKind::lorenz:
            c.t_final = 10.0;
            c.time_points = 250000;
            c.initial_state = {-8.0, 7.0, 27.0};
            break;
        case SystemKind::cubic_oscillator:
            c.t_final = 25.0;
            c.time_points = 100000;
            c.initial_state = {2.0, 0.0};
            break;
        case SystemKind::burgers_nl:
            c.t_final = 1.5;
            c.time_points = 451;
            c.x_min = -1.0;
            c.x_max = 1.0;
            c.space_points = 512;
            c.initial_profile = "gaussian";
            c.substeps = 16;
            break;
        case SystemKind::hyper_ks:
            c.t_final = 82.0;
            c.time_points = 257;
            c.x_min = 0.0;
            c.x_max = 32.0 * std::numbers::pi;
            c.space_points = 256;
            c.initial_profile = "cos_sin";
            c.substeps = 64;
            break;
    }
    return c;
}

std::array<double, 3> lorenz_rhs(const std::array<double, 3>& u) noexcept {
    return {-10.0 * u[0] + 10.0 * u[1], 28.0 * u[0] - u[1] - u[0] * u[2], -8.0 / 3.0 * u[2] + u[0] * u[1]};
}

std::array<double, 2> cubic_oscillator_rhs(const std::array<double, 2>& u) noexcept {
    const double a = u[0] * u[0] * u[0], b = u[1] * u[1] * u[1];
    return {-0.1 * a + 2.0 * b, -2.0 * a - 0.1 * b};
}

double hyper_ks_symbol(double k) noexcept {
    const double k2 = k * k;
    return k2 * k2 - 0.75 * k2 * k2 * k2;
}

Dataset simulate_lorenz(const SimConfig& config) { return integrate_ode<3>(config, lorenz_rhs, "lorenz"); }

Dataset simulate_cubic_oscillator(const SimConfig& config) {
    return integrate_ode<2>(config, cubic_oscillator_rhs, "cubic_oscillator");
}

namespace {

std::vector<double> initial_profile(const SimConfig& cfg) {
    const std::size_t N = cfg.space_points;
    const double length = cfg.x_max - cfg.x_min;
    std::vector<double> u(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double x = cfg.x_min + length * static_cast<double>(i) / static_cast<double>(N);
        if (cfg.initial_profile == "gaussian")
            u[i] = std::exp(-36.0 * x * x);
        else if (cfg.initial_profile == "cos_sin")
            u[i] = std::cos(x / 16.0) * (1.0 + std::sin(x / 16.0));
        else if (cfg.initial_profile == "zero")
            u[i] = 0.0;
        else
            throw std::invalid_argument("unknown initial profile '" + cfg.initial_profile + "'");
        u[i] = cfg.profile_scale * u[i] + cfg.profile_offset;
    }
    return u;
}

void check_pde_config(const SimConfig& cfg, const char* name) {
    if (cfg.space_points < 8 || cfg.space_points % 2 || cfg.time_points < 2 || !(cfg.t_final > 0.0) ||
        !(cfg.x_max > cfg.x_min))
        throw std::invalid_argument(std::string(name) + ": bad grid configuration");
}

}  // namespace

Dataset simulate_burgers_nl(const SimConfig& config) {
    check_pde_config(config, "burgers_nl");
    auto nonlinear = [](PeriodicSpectral& sp, const std::vector<cplx>& v) {
        const std::size_t M = sp.padded_size();
        const double* u = sp.pad_to_physical(v);
        std::vector<double> sq(M), rest(M);
        for (std::size_t i = 0; i < M; ++i) {
            const double x = u[i];
            sq[i] = x * x;
            rest[i] = -x * x * x + 2.0 * x * x + 1.0;
        }
        auto sq_hat = sp.padded_to_spectral(sq);
        auto out = sp.padded_to_spectral(rest);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += cplx(0.0, -0.5 * sp.wavenumber(j)) * sq_hat[j];
        return out;
    };
    Dataset d =
        run_pde(config, [](double k) { return -0.01 * k * k; }, nonlinear, initial_profile(config), "burgers_nl");
    d.metadata["initial_profile"] = config.initial_profile;
    d.metadata["profile_scale"] = join({config.profile_scale});
    d.metadata["profile_offset"] = join({config.profile_offset});
    return d;
}

Dataset simulate_hyper_ks(const SimConfig& config) {
    check_pde_config(config, "hyper_ks");
    auto nonlinear = [](PeriodicSpectral& sp, const std::vector<cplx>& v) {
        const std::size_t M = sp.padded_size();
        const double* u = sp.pad_to_physical(v);
        std::vector<double> sq(M);
        for (std::size_t i = 0; i < M; ++i) sq[i] = u[i] * u[i];
        auto out = sp.padded_to_spectral(sq);
        // -0.5 d/dx (u^2) + 0.1 d^3/dx^3 (u^2) -> -i (0.5 k + 0.1 k^3) F[u^2]
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double k = sp.wavenumber(j);
            out[j] *= cplx(0.0, -(0.5 * k + 0.1 * k * k * k));
        }
        return out;
    };
    Dataset d = run_pde(config, hyper_ks_symbol, nonlinear, initial_profile(config), "hyper_ks");
    d.metadata["initial_profile"] = config.initial_profile;
    d.metadata["profile_scale"] = join({config.profile_scale});
    d.metadata["profile_offset"] = join({config.profile_offset});
    if (config.burn_in > 0.0) d.metadata["burn_in"] = std::to_string(config.burn_in);
    return d;
}

Dataset simulate(const SimConfig& config) {
    switch (config.system) {
        case SystemKind::lorenz:
            return simulate_lorenz(config);
        case SystemKind::cubic_oscillator:
            return simulate_cubic_oscillator(config);
        case SystemKind::burgers_nl:
            return simulate_burgers_nl(config);
        case SystemKind::hyper_ks:
            return simulate_hyper_ks(config);
    }
    throw std::invalid_argument("simulate: unknown system");
}

}  // namespace wsindy

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "wsindy/core_data.hpp"

namespace wsindy {

enum class SystemKind { lorenz, cubic_oscillator, burgers_nl, hyper_ks };

[[nodiscard]] SystemKind parse_system(const std::string& name);
[[nodiscard]] const char* to_string(SystemKind kind) noexcept;

struct SimConfig {
    SystemKind system = SystemKind::lorenz;
    double t_final = 10.0;
    std::size_t time_points = 250000;
    /// Spatial domain [x_min, x_max) for the periodic PDEs.
    double x_min = 0.0, x_max = 1.0;
    std::size_t space_points = 0;
    /// ODE initial state; empty for PDEs (which use the named profile).
    std::vector<double> initial_state;
    std::string initial_profile;
    /// PDE start is profile_scale * profile(x) + profile_offset.
    double profile_scale = 1.0;
    double profile_offset = 0.0;
    /// ODE error control; the relative part is off so the absolute bound governs.
    double abs_tol = 1e-12;
    double rel_tol = 0.0;
    /// Exponential-integrator substeps per output interval.
    int substeps = 0;
    bool dealias = true;
    /// Simulated time discarded before the recorded window starts.
    double burn_in = 0.0;
};

/// Default settings for each system at desk scale.
[[nodiscard]] SimConfig default_sim_config(SystemKind system);

[[nodiscard]] std::array<double, 3> lorenz_rhs(const std::array<double, 3>& u) noexcept;
[[nodiscard]] std::array<double, 2> cubic_oscillator_rhs(const std::array<double, 2>& u) noexcept;
/// Fourier symbol of the hyper-KS linear part at wavenumber k.
[[nodiscard]] double hyper_ks_symbol(double k) noexcept;

[[nodiscard]] Dataset simulate_lorenz(const SimConfig& config);
[[nodiscard]] Dataset simulate_cubic_oscillator(const SimConfig& config);
[[nodiscard]] Dataset simulate_burgers_nl(const SimConfig& config);
[[nodiscard]] Dataset simulate_hyper_ks(const SimConfig& config);
[[nodiscard]] Dataset simulate(const SimConfig& config);

}  // namespace wsindy

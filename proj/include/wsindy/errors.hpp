#pragma once

#include <stdexcept>

namespace wsindy {

/// Malformed or inconsistent dataset file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integrator failure or non-finite state during a simulation.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An exhaustive enumeration would exceed its configured budget.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A noise multiplier vanished, so the biased system cannot be inverted.
class SingularBiasError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wsindy

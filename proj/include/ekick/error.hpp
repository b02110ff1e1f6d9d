#pragma once

#include <stdexcept>
#include <string>

namespace ekick {

/// Raised for physically or structurally invalid inputs (negative lengths,
/// sub-threshold energies where an open channel is required, bad indices).
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical procedure fails to reach its convergence target
/// within the configured budget.
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// The discretized scattering system is numerically singular.
class SingularSystem : public ConvergenceError {
public:
    SingularSystem(const std::string& what, double rcond)
        : ConvergenceError(what), rcond_(rcond) {}
    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

/// A probed channel lies too close to its excitation threshold, where the
/// 1/v prefactor of the final-state flux diverges.
class ThresholdExclusion : public InvalidInput {
public:
    explicit ThresholdExclusion(const std::string& what) : InvalidInput(what) {}
};

} // namespace ekick

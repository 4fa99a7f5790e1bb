#pragma once

#include <stdexcept>
#include <string>

namespace kalgain {

/// Malformed or inconsistent input data (dimensions, non-finite entries, bad covariances).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Out-of-range algorithm parameter (tolerances, horizons, batch sizes, ...).
struct ParameterError : std::runtime_error {
    explicit ParameterError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A gain or closed-loop matrix is not Schur stable where stability is required.
/// Semantically the cost is +infinity at such a point.
struct InstabilityError : std::runtime_error {
    explicit InstabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical operation failed (e.g. a Cholesky factorization of a matrix
/// that should have been positive definite).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An iteration did not reach its tolerance within the allowed budget.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A line search rejected every candidate step.
struct StepFailureError : std::runtime_error {
    explicit StepFailureError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid experiment configuration; the message carries the offending field path.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kalgain

#pragma once

#include <stdexcept>
#include <string>

namespace eitbin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument value or precondition violation (bad radius, mismatched lengths, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Weights leaving the probability simplex, bounds that cannot be satisfied.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// Electrode arcs that overlap or capture no boundary edge.
class LayoutError : public Error {
public:
    using Error::Error;
};

/// Linear system could not be factorized or solved to the required residual.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Malformed files, unreadable paths.
class IoError : public Error {
public:
    using Error::Error;
};

/// Bad run configuration. `field()` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Kappa test asked to divide by a zero directional derivative.
class DegenerateDirectionError : public Error {
public:
    using Error::Error;
};

}  // namespace eitbin

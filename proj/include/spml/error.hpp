#pragma once

#include <stdexcept>
#include <string>

namespace spml {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands live on different grids or have inconsistent lengths.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument is outside the domain of the operation (negative density,
/// nonpositive weight, zero field where a norm must be differentiated...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated, or wrong-version input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Time integration could not proceed (step size underflow, non-finite state).
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double last_good_time)
        : Error(what), last_good_time_(last_good_time) {}

    double last_good_time() const noexcept { return last_good_time_; }

private:
    double last_good_time_;
};

/// Library generation or attractor discovery failed to produce the requested data.
class GenerationError : public Error {
public:
    using Error::Error;
};

}  // namespace spml

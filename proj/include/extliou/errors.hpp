#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace extliou {

/// Root of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParameterError : Error {
    using Error::Error;
};

/// Environment whose correlation function vanishes identically (q = 1).
struct DegenerateEnvironmentError : ParameterError {
    using ParameterError::ParameterError;
};

struct DimensionError : Error {
    using Error::Error;
};

/// A configured size cap would be exceeded.
struct CapacityError : DimensionError {
    using DimensionError::DimensionError;
};

struct UnsupportedError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    NumericalError(const std::string& what, long iterations = -1)
        : Error(what), iterations(iterations) {}
    long iterations;
};

struct StiffnessError : NumericalError {
    StiffnessError(const std::string& what, double time)
        : NumericalError(what), time(time) {}
    double time;
};

struct AccuracyError : NumericalError {
    AccuracyError(const std::string& what, double achieved)
        : NumericalError(what), achieved(achieved) {}
    double achieved;
};

/// Eigenvalue clusters that cannot be separated reliably.
struct AmbiguityError : NumericalError {
    AmbiguityError(const std::string& what, std::vector<double> gaps)
        : NumericalError(what), gaps(std::move(gaps)) {}
    std::vector<double> gaps;
};

struct BracketError : NumericalError {
    using NumericalError::NumericalError;
};

struct TrackingError : NumericalError {
    using NumericalError::NumericalError;
};

struct NotInRegimeError : NumericalError {
    using NumericalError::NumericalError;
};

struct NotBlockDecomposableError : NumericalError {
    NotBlockDecomposableError(const std::string& what, double max_cross)
        : NumericalError(what), max_cross(max_cross) {}
    double max_cross;
};

/// Invalid scenario document; `field` is the offending path, e.g. "model.environment.lambda".
struct ConfigError : Error {
    ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field(field) {}
    std::string field;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace extliou

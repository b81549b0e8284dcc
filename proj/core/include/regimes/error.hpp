#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace regimes {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter value is malformed (non-stochastic row, non-positive variance, NaN, ...).
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A parameter is well formed but violates a model constraint (ε floors, σ floor).
class ConstraintViolation : public Error {
public:
    using Error::Error;
};

/// Aggregated validation failure; `violations()` lists each problem separately.
class ValidationError : public ConstraintViolation {
public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// Numerical failure while evaluating a likelihood.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, long index = -1)
        : Error(what), index_(index) {}
    long index() const noexcept { return index_; }

private:
    long index_;
};

/// Estimation could not produce a usable fit.
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Request exceeds a hard size guard (brute-force enumeration).
class TooLarge : public Error {
public:
    using Error::Error;
};

}  // namespace regimes

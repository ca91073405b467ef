#pragma once

#include <stdexcept>
#include <string>

namespace ringfc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid physical input (negative rate, nu outside (0,1], ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class ResolutionError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

class StiffnessError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

class NoSplittingError : public Error {
public:
    using Error::Error;
};

class FitFailure : public ConvergenceError {
public:
    FitFailure(const std::string& what, std::string diagnostics)
        : ConvergenceError(what), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

// Raised when the synthesized control would need a negative squared amplitude.
class PositivityViolation : public DomainError {
public:
    PositivityViolation(const std::string& what, double critical_time)
        : DomainError(what), critical_time_(critical_time) {}
    double critical_time() const noexcept { return critical_time_; }

private:
    double critical_time_;
};

} // namespace ringfc

#pragma once

#include <stdexcept>
#include <string>

namespace kerrspec {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

// Singular or ill-conditioned linear system.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, double condition_estimate)
        : Error(what + " (condition estimate " + std::to_string(condition_estimate) + ")")
        , condition_estimate_(condition_estimate) {}

    explicit NumericalFailure(const std::string& what) : Error(what), condition_estimate_(0.0) {}

    double condition_estimate() const noexcept { return condition_estimate_; }

private:
    double condition_estimate_;
};

// Circuit model could not produce a mode (no root in the scanned bracket, divergent inductance).
class ModelFailure : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    FitFailure(const std::string& what, double residual_rms)
        : Error(what + " (residual rms " + std::to_string(residual_rms) + ")")
        , residual_rms_(residual_rms) {}

    explicit FitFailure(const std::string& what) : Error(what), residual_rms_(0.0) {}

    double residual_rms() const noexcept { return residual_rms_; }

private:
    double residual_rms_;
};

// A spectral feature the caller asked for is not present in the data.
class NotFound : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace kerrspec

#pragma once

#include <stdexcept>
#include <string>

namespace pcdtest {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidIndex : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class RankDeficient : public Error {
public:
    using Error::Error;
};

/// Residual variance of a Gaussian fit is zero; every transform would divide by it.
class DegenerateFit : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, int iterations)
        : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
          iterations_(iterations) {}

    int iterations() const noexcept { return iterations_; }

private:
    int iterations_;
};

/// Too many bootstrap replications failed to refit.
class BootstrapFailure : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

}  // namespace pcdtest

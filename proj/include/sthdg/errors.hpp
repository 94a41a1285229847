#pragma once

#include <stdexcept>
#include <string>

namespace sthdg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid element or face geometry (inverted, degenerate, singular mass).
class GeometryError : public Error {
public:
    GeometryError(const std::string& what, long element = -1)
        : Error(what), element_(element) {}
    long element() const noexcept { return element_; }

private:
    long element_;
};

/// Mesh connectivity that is neither conforming nor 1-irregular.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// Inconsistent or out-of-range run parameters.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// A function was called outside its contract.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Direct factorization breakdown or iterative non-convergence.
class SolverError : public Error {
public:
    SolverError(const std::string& what, long location = -1, double residual = 0.0)
        : Error(what), location_(location), residual_(residual) {}
    /// Pivot row (direct) or -1.
    long location() const noexcept { return location_; }
    /// Final relative residual (iterative) or 0.
    double residual() const noexcept { return residual_; }

private:
    long location_;
    double residual_;
};

} // namespace sthdg

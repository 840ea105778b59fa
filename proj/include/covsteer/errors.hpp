#pragma once

#include <stdexcept>
#include <string>

namespace covsteer {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad model data, dimensions, or problem inputs. CLI exit code 2.
class ValidationError : public Error {
  public:
    using Error::Error;
};

class DimensionError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// A requested schedule derivative order is not available.
class DerivativeOrderError : public ValidationError {
  public:
    DerivativeOrderError(const std::string& msg, int required)
        : ValidationError(msg), required_order(required) {}
    int required_order;
};

/// The steering problem itself is infeasible (not a numerical failure).
class InfeasibleError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Anchor violates the Riccati existence condition; the flow blows up
/// inside the horizon at approximately escape_time.
class FiniteEscapeError : public Error {
  public:
    FiniteEscapeError(const std::string& msg, double t_escape)
        : Error(msg), escape_time(t_escape) {}
    double escape_time;
};

/// Root finding failed to converge. CLI exit code 3.
class SolverError : public Error {
  public:
    using Error::Error;
};

/// Monte Carlo stage failure. CLI exit code 4.
class SimulationError : public Error {
  public:
    using Error::Error;
};

/// Integrator or quadrature breakdown.
class NumericalError : public Error {
  public:
    using Error::Error;
};

class KernelMismatchError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

}  // namespace covsteer

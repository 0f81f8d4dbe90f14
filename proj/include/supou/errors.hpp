#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace supou {

/// Base class for every diagnostic raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Moment or cumulant of an order the Levy measure cannot support (k - q <= 0).
class DivergentMomentError : public Error {
public:
    using Error::Error;
};

/// Operation needs a finite Levy mass but q >= 0.
class InfiniteActivityError : public Error {
public:
    using Error::Error;
};

/// Shape alpha below 1 somewhere.
class IllPosedError : public Error {
public:
    using Error::Error;
};

/// Weight normalization integral does not converge.
class NormalizationError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what, double best_residual)
        : Error(what), best_residual_(best_residual) {}
    [[nodiscard]] double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

/// Momentum descent ran out of iterations.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, double tau, double mu, double grad_tau,
                        double grad_mu)
        : Error(what), tau(tau), mu(mu), grad_tau(grad_tau), grad_mu(grad_mu) {}
    double tau, mu, grad_tau, grad_mu;
};

/// The grid cannot absorb the budget: even the distortion concentrated on the extreme
/// node row fits, so the discretized bound is the grid extreme and no tau > 0 is optimal.
class BudgetSaturationError : public Error {
public:
    BudgetSaturationError(const std::string& what, double grid_bound) : Error(what), grid_bound(grid_bound) {}
    double grid_bound;
};

class InadmissibleTiltingError : public Error {
public:
    InadmissibleTiltingError(const std::string& what, std::size_t component)
        : Error(what), component(component) {}
    std::size_t component;
};

/// Explicit decay factor 1 - r dt would not stay positive.
class StabilityError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};

}  // namespace supou

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xsymp {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Hamiltonian or a coordinate map produced a non-finite value, or was
/// evaluated outside its open domain.
class DomainError : public Error {
public:
    DomainError(const std::string& what, std::ptrdiff_t coordinate = -1)
        : Error(what), coordinate_(coordinate) {}

    /// Index of the seeded coordinate (0..2d-1, momenta first) during which
    /// the failure was detected, or -1 when not tied to a gradient pass.
    std::ptrdiff_t coordinate() const noexcept { return coordinate_; }

private:
    std::ptrdiff_t coordinate_;
};

/// Invalid user-supplied parameters: weights, tolerances, run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An implicit solve did not reach its tolerance within max_iters.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Two reference integrations at different step sizes disagree.
class ReferenceUnreliable : public Error {
public:
    ReferenceUnreliable(const std::string& what, double first_failing_t, double disagreement)
        : Error(what), t_(first_failing_t), disagreement_(disagreement) {}

    double first_failing_t() const noexcept { return t_; }
    double disagreement() const noexcept { return disagreement_; }

private:
    double t_;
    double disagreement_;
};

/// A growth-law or order fit had too few usable samples.
class FitError : public Error {
public:
    using Error::Error;
};

/// Wraps the error of a failed time step with the 1-based step index.
class StepError : public Error {
public:
    StepError(const std::string& what, std::size_t step_index, bool convergence_failure)
        : Error(what), step_(step_index), convergence_(convergence_failure) {}

    std::size_t step_index() const noexcept { return step_; }
    bool convergence_failure() const noexcept { return convergence_; }

private:
    std::size_t step_;
    bool convergence_;
};

}  // namespace xsymp

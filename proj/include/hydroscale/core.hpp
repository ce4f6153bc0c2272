#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hydroscale {

/// Truncated element of H: real coefficients in the owning model's basis.
using State = Eigen::VectorXd;

/// Raised when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a time integration produces a non-finite state.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Raised when an experiment cannot produce a trustworthy statistic
/// (e.g. too many replicas excluded after blow-up).
class ExperimentFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const State& v) {
    return v.allFinite();
}

inline void require(bool cond, const std::string& message) {
    if (!cond) throw InvalidInput(message);
}

}  // namespace hydroscale

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sit {

/// Argument outside the domain of an operation (e.g. t outside [0,1]).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A formula was asked for a value at a point where it is singular
/// (sigma_dot at t=0 for SBDM-VP, 1/alpha at alpha=0, 1/sigma at sigma=0).
class SingularityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid configuration, missing file, malformed input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite state during integration or training.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::size_t step)
        : std::runtime_error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace sit

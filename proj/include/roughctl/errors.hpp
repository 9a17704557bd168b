#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roughctl {

// Invalid arguments are reported with std::invalid_argument; the types below
// cover the numerical failure modes.

/// A step produced a non-finite state.
class NumericalOverflow : public std::runtime_error {
public:
    NumericalOverflow(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Riccati solution exceeded its norm cap.
class FiniteEscape : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A state left the mesh it is represented on.
class OutOfDomain : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A scheme would need more sub-steps than allowed.
class ResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void require(bool condition, const char* message);

}  // namespace roughctl

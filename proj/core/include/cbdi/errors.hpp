#pragma once

#include <stdexcept>
#include <string>

namespace cbdi {

/// Bad user input: malformed config, invalid parameters, violated preconditions.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical routine could not certify its result (quadrature residual too
/// large, divergent Newton bracket, ...). Carries the residual estimate when
/// one is available.
class numerical_error : public std::runtime_error {
public:
    numerical_error(const std::string& msg, double residual = 0.0)
        : std::runtime_error(msg), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Two routes that must agree disagreed (dual-route integral identities,
/// coupled-path ordering). Indicates a bug, not bad input.
class consistency_error : public std::logic_error {
public:
    explicit consistency_error(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace cbdi

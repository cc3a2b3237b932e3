#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace floquet {

/// Invalid user input: mesh sizes, operator coefficients, config keys.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical kernel failed: singular solve, eigensolver breakdown,
/// non-convergent pullback iteration, non-exponential separation fit.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, std::vector<double> diagnostics = {})
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

    const std::vector<double>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<double> diagnostics_;
};

} // namespace floquet

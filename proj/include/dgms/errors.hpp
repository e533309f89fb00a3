#pragma once

#include <stdexcept>
#include <string>

namespace dgms {

/// Invalid user input: levels, boundary selectors, coefficient parameters.
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed external file (raster, cache record); carries the offending line.
class IngestionError : public std::runtime_error
{
public:
    IngestionError(const std::string& what, int line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line)
    {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// A solver failed to reach its target. `residual` is what it achieved.
class NumericalError : public std::runtime_error
{
public:
    NumericalError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual)
    {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

} // namespace dgms

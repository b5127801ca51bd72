#pragma once

#include <stdexcept>
#include <string>

namespace msaddle {

// Numerical failure at runtime (non-finite gradient, non-convergence, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// An inner solver (bisection, power iteration) failed to meet its tolerance.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// A model assumption required by the method does not hold (singular A or C,
// tau > T/2, unreachable spectral target, ...).
class AssumptionError : public std::runtime_error {
public:
    explicit AssumptionError(const std::string& what) : std::runtime_error(what) {}
};

// A finite sample stream ran out before the requested horizon.
class StreamExhausted : public std::runtime_error {
public:
    explicit StreamExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Bad experiment configuration (unknown key, missing file, invalid value).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace msaddle

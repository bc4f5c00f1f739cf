#pragma once

#include <stdexcept>
#include <string>

namespace gfflab {

// Base error for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user input: config keys, CLI values, precondition violations.
struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(what) {}
};

// A linear solve did not reach the requested residual.
struct SolverError : Error {
    SolverError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual(residual) {}
    double residual;
};

// Numerical routine failed to reach its accuracy target.
struct AccuracyError : Error {
    explicit AccuracyError(const std::string& what) : Error(what) {}
};

// Resource limits (memory estimate, size caps).
struct ResourceError : Error {
    explicit ResourceError(const std::string& what) : Error(what) {}
};

} // namespace gfflab

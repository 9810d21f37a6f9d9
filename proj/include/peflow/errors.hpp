#pragma once

#include <stdexcept>
#include <string>

namespace peflow {

// Bad user input: config schema violations, non-probability masses, invalid CDFs.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside the solver (non-finite state, quadrature breakdown).
class IntegrationError : public std::runtime_error {
public:
    explicit IntegrationError(const std::string& what) : std::runtime_error(what) {}
};

// Step budget exhausted; the partial trajectory is still available to the caller.
class TruncationError : public std::runtime_error {
public:
    explicit TruncationError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace peflow

#pragma once

#include <stdexcept>
#include <string>

namespace bprelab {

// Invalid or inconsistent configuration (CLI exit 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Request is well-formed but numerically unsafe to honor, e.g. a tail
// approximation whose justification fails for the given environment
// (CLI exit 3).
struct NumericRefusal : std::runtime_error {
    explicit NumericRefusal(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bprelab

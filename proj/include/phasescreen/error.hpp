#pragma once

#include <stdexcept>
#include <string>

namespace phasescreen {

/// Raised for invalid parameters or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot meet its contract (CLI exit code 2).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace detail
}  // namespace phasescreen

#pragma once

#include <stdexcept>
#include <string>

namespace streamocc {

/// Violated precondition or internal invariant. Maps to CLI exit code 3.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

/// Malformed or missing user input (files, scene data). Maps to CLI exit code 1.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Inconsistent run configuration (missing weights, bad flags). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool condition, const std::string& msg) {
    if (!condition) throw ContractViolation(msg);
}

} // namespace streamocc

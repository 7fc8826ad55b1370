#pragma once

#include <stdexcept>
#include <string>

namespace coalscreen {

/// Bad input: malformed files, invalid parameters, contract violations the
/// caller can fix. CLI maps these to exit code 1.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solver ran out of its iteration budget. CLI maps these to
/// exit code 2.
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace coalscreen

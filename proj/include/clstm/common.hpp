#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clstm {

// Bad or inconsistent input data (CSV schema violations, calendar gaps,
// ranges outside the panel, ...). Maps to CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (non-finite gradients, singular covariance, diverged
// training). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace clstm

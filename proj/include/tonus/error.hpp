#pragma once

#include <stdexcept>
#include <string>

namespace tonus {

// Data, format or shape problems: bad files, out-of-range events,
// mismatched tensor shapes. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical blow-up during training (non-finite loss). Maps to CLI exit code 3.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tonus

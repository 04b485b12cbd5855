#pragma once

#include <stdexcept>
#include <string>

namespace sdm {

// Dimension mismatch between operands.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Precondition violation on an operation (wrong call order, bad state).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Scalar argument outside its admissible range.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Request that hits a known singular point (e.g. score at zero noise).
struct SingularityError : DomainError {
    explicit SingularityError(const std::string& msg) : DomainError(msg) {}
};

// Invalid configuration value.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File or stream failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sdm

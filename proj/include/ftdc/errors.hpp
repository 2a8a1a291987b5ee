#pragma once

#include <stdexcept>
#include <string>

namespace ftdc {

// Malformed or inconsistent input data (files, cohorts, meshes, dimensions).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical procedure failed (non-convergence, singular system, zero variance).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters supplied by the caller (out-of-range k, negative bandwidth, ...).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace ftdc

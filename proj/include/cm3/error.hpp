#pragma once

#include <stdexcept>

namespace cm3 {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad parameters or configuration supplied by the caller.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or inconsistent data: streams, documents, distributions.
struct DataError : Error {
    using Error::Error;
};

// Mismatched dimensions or lengths.
struct ShapeError : DataError {
    using DataError::DataError;
};

// File system and serialized-format problems.
struct IoError : Error {
    using Error::Error;
};

} // namespace cm3

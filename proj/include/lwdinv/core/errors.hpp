#pragma once

#include <stdexcept>
#include <string>

namespace lwdinv {

// Exit-code classes for the CLI: usage=1, validation=2, numerical=3.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateGeometryError : ValidationError {
    using ValidationError::ValidationError;
};

struct BoundaryCollisionError : ValidationError {
    using ValidationError::ValidationError;
};

struct SingularFieldError : ValidationError {
    using ValidationError::ValidationError;
};

struct RangeError : ValidationError {
    using ValidationError::ValidationError;
};

struct ShapeError : ValidationError {
    using ValidationError::ValidationError;
};

struct SchemaError : ValidationError {
    using ValidationError::ValidationError;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : NumericalError {
    using NumericalError::NumericalError;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChecksumError : IoError {
    using IoError::IoError;
};

}  // namespace lwdinv

#pragma once

#include <stdexcept>
#include <string>

namespace ecdans {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: flags, specs, dimensions. Maps to CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed CSV or graph JSON. Maps to CLI exit code 1.
class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DimensionMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A lag larger than the window's tau_max was requested.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Collinear regressors; the test carries no information.
class DegenerateConditioning : public Error {
public:
    using Error::Error;
};

class InsufficientSample : public Error {
public:
    using Error::Error;
};

/// Constant input to a kernel test (median bandwidth of zero).
class DegenerateKernel : public Error {
public:
    using Error::Error;
};

/// Broken internal invariant, e.g. a removed edge without a separating set.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

}  // namespace ecdans

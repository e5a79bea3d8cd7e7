#pragma once

#include <stdexcept>
#include <string>

namespace eegattr {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf reached a place where only finite values are allowed.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Bad argument or configuration value.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed file content (header, manifest, coordinates).
class FormatError : public Error {
public:
    using Error::Error;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Persisted tensors do not match the architecture they claim to belong to.
class ShapeMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Electrode coordinate outside the unit disc.
class CoordinateError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace eegattr

#pragma once

#include <stdexcept>
#include <string>

namespace ohtlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, inconsistent or insufficient data (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// A computation could not be completed reliably (CLI exit code 4).
class NumericalError : public Error {
public:
    using Error::Error;
};

class UnsupportedStateError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class TruncationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class PurityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ReferencePointError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Too few distinct LO phases for the requested photon-number range.
class AliasingError : public DataError {
public:
    using DataError::DataError;
};

} // namespace ohtlab

#pragma once

#include <stdexcept>
#include <string>

namespace tjf {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shapes do not admit the requested operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An operation argument is out of its valid range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input data violates a structural contract (inconsistent agent counts,
/// demonstrations too short, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// A file could not be parsed; carries the offending line number.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A configuration value is invalid or inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training or inference produced non-finite values.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A checkpoint does not match the requested configuration or dataset.
class IncompatibilityError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tjf

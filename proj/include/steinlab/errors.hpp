#pragma once

#include <stdexcept>
#include <string>

namespace steinlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation (e.g. t > 1).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Path or functional dimensions do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// The model is valid syntactically but degenerate (e.g. zero variance normaliser).
class DegenerateModelError : public Error {
public:
    using Error::Error;
};

/// The requested operation is not available for this object.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Invalid numerical data (non-finite sample, malformed model file, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Not enough samples for the requested statistic.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Bad command-line usage; maps to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace steinlab

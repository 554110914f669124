#pragma once

#include <stdexcept>
#include <string>

namespace ikrnet {

// Base of every error raised by the library. Callers that only care about
// "something went wrong in ikrnet" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Tensor shape / dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid model or generator configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Flat (zero-variance) signal where a non-degenerate one is required.
class DegenerateSignal : public Error {
public:
    using Error::Error;
};

class InsufficientBeats : public Error {
public:
    using Error::Error;
};

// ROC requested over a single-class indicator.
class UndefinedRoc : public Error {
public:
    using Error::Error;
};

// Corrupt files, hash mismatches, inconsistent manifests.
class IntegrityError : public Error {
public:
    using Error::Error;
};

}  // namespace ikrnet

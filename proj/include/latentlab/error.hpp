#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace latentlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or lengths that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An operation was invoked in a state that does not permit it.
class StateError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Inputs outside their admissible domain (pixels outside [0,1], sigma <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Malformed files: manifests, checkpoints, codebooks, centers.
class ParseError : public Error {
public:
    using Error::Error;
};

class EmptyCorpusError : public Error {
public:
    using Error::Error;
};

/// A codebook that does not belong to the model it is used with.
class StaleCodebookError : public Error {
public:
    using Error::Error;
};

inline void warn(const std::string& message) {
    std::cerr << "warning: " << message << '\n';
}

}  // namespace latentlab

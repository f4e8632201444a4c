#pragma once

#include <stdexcept>
#include <string>

namespace melai {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A genome, body-plan or controller whose structure violates an invariant.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Vector length does not match the expected dimension.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Decoding produced no skeleton voxel.
class DegenerateBodyError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace melai

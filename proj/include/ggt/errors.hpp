#pragma once

#include <stdexcept>
#include <string>

namespace ggt {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes that do not agree, or extents the operation cannot accept.
class DimensionError : public Error {
public:
    using Error::Error;
};

// NaN / Inf where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Invalid hyper-parameters or input geometry.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Token grid not divisible by the partition side.
class PartitionError : public Error {
public:
    using Error::Error;
};

// Operation invoked in the wrong state (e.g. backward without a recorded forward).
class StateError : public Error {
public:
    using Error::Error;
};

// Integer overflow in cost accounting.
class ArithmeticError : public Error {
public:
    using Error::Error;
};

// Malformed GGT1 files or checkpoint manifests.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace ggt

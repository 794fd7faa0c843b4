#pragma once

#include <stdexcept>
#include <string>

namespace frgnn {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A graph violates a CSR or symmetry invariant.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// A loss or activation went NaN/Inf.
class NumericError : public Error {
public:
    using Error::Error;
};

/// On-disk bundle, checkpoint or split file is malformed or missing.
class DataError : public Error {
public:
    using Error::Error;
};

/// Bad configuration or command-line usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Operation called in the wrong state (e.g. backward without a cached forward).
class StateError : public Error {
public:
    using Error::Error;
};

namespace detail {

template <typename E = ShapeError>
inline void require(bool ok, const std::string& what) {
    if (!ok) throw E(what);
}

} // namespace detail
} // namespace frgnn

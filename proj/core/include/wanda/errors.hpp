// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wanda {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes do not line up (dimension mismatch, empty matrix, ...).
class ShapeError : public Error {
public:
    using Error::Error;
};

// An argument value is out of its contract (ratio outside [0,1), m not
// dividing the input width, asymmetric matrix passed to an SPD solver, ...).
class ArgError : public Error {
public:
    using Error::Error;
};

// A pruning configuration combines options that do not go together.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Cholesky hit a non-positive (numerically zero) pivot: the matrix is not
// positive definite. pivot_index is the offending diagonal position.
class SingularError : public Error {
public:
    SingularError(const std::string& msg, std::size_t pivot)
        : Error(msg), pivot_index(pivot) {}
    std::size_t pivot_index;
};

// A NaN or infinity showed up in a runtime computation (e.g. activations
// overflowed during a forward pass).
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// Could not open/read/write a file at all.
class IoError : public Error {
public:
    IoError(const std::string& msg, std::string p) : Error(msg), path(std::move(p)) {}
    std::string path;
};

// A file opened fine but its contents violate the format contract. Every
// distinct way a file can be bad gets its own kind so loaders never guess.
class FormatError : public Error {
public:
    enum class Kind {
        bad_magic,
        bad_version,
        malformed_json,
        bad_field,
        truncated,
        blob_mismatch,
        shape_chain,
        non_finite,
    };
    FormatError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
    Kind kind;
};

}  // namespace wanda

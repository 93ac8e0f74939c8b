#pragma once

#include <stdexcept>
#include <string>

namespace stochabound {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent user input (dimensions, config fields, ...).
class InputError : public Error {
public:
    using Error::Error;
};

class DimensionError : public InputError {
public:
    using InputError::InputError;
};

class SymmetryError : public InputError {
public:
    using InputError::InputError;
};

/// A structural assumption on the system is violated (e.g. the drift
/// matrix is not Hurwitz), so certification does not apply.
class AssumptionError : public Error {
public:
    using Error::Error;
};

/// The certification condition fails, so the requested bound does not exist.
class BoundUndefinedError : public Error {
public:
    using Error::Error;
};

/// The quadratic degenerates (c = 0); its two roots collapse.
class DegenerateQuadraticError : public Error {
public:
    using Error::Error;
};

/// Parameters outside the domain of a closed-form expression.
class OutsideDomainError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to meet its accuracy contract.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Requested computation exceeds a hard resource guard.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// A simulated state left the finite range; carries path/step context.
class BlowUpError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace stochabound

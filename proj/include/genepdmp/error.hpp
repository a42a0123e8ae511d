#pragma once

#include <stdexcept>
#include <string>

namespace genepdmp {

class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

/// Invalid input to an operation (negative time, out-of-range state, bad ordering).
class ArgumentError : public Error {
 public:
    using Error::Error;
};

/// The eigenbasis does not exist because two of {1, a, b} coincide.
class DegenerateParamsError : public Error {
 public:
    using Error::Error;
};

/// A rate definition that cannot drive the process (syntax, sign, or the
/// nondegeneracy requirements at the two flow equilibria).
class SpecError : public Error {
 public:
    using Error::Error;
};

/// Quadrature, root finding, or ODE integration failed to converge.
class NumericalError : public Error {
 public:
    using Error::Error;
};

/// Gamma = q0 / (q0 + q1) is undefined where both rates vanish.
class SingularityError : public NumericalError {
 public:
    using NumericalError::NumericalError;
};

}  // namespace genepdmp

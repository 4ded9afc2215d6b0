#pragma once

#include <stdexcept>
#include <string>

namespace tbrk {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible shapes passed to a kernel or tensor operation.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A pivot (or shifted operator) fell below the relative singularity threshold.
class SingularMatrix : public Error {
public:
    using Error::Error;
};

/// An iterative eigenvalue sweep exceeded its budget.
class NonConvergence : public Error {
public:
    using Error::Error;
};

/// The new Krylov block is numerically contained in the current span.
class DeflationError : public Error {
public:
    using Error::Error;
};

/// Every mode deflated before a usable subspace could be formed.
class DeflationExhausted : public Error {
public:
    using Error::Error;
};

/// A dense materialization would exceed the configured element budget.
class SizeOverflow : public Error {
public:
    using Error::Error;
};

/// A pole query needs eigenvalue clouds that have not been populated yet.
class EmptySurrogate : public Error {
public:
    using Error::Error;
};

/// The projected operator has a (near-)zero eigenvalue sum; the inner
/// equation is unsolvable with the current poles.
class SingularOperator : public Error {
public:
    using Error::Error;
};

/// Eigenvector conditioning too poor for the diagonalization solver.
class IllConditioned : public Error {
public:
    using Error::Error;
};

/// A structural precondition (e.g. trailing infinite pole) does not hold.
class PreconditionViolation : public Error {
public:
    using Error::Error;
};

/// Right-hand-side expression not in the supported family.
class UnsupportedExpression : public Error {
public:
    using Error::Error;
};

}  // namespace tbrk

#pragma once

#include <stdexcept>
#include <string>

namespace infsup {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

/// A precondition on user-supplied parameters was violated.
class InvalidInput : public Error {
 public:
    using Error::Error;
};

/// A matrix that must be nonsingular (A, or the pressure Schur complement) is not.
class SingularSystem : public Error {
 public:
    using Error::Error;
};

/// The eigensolver exhausted its iteration budget.
class NonConvergence : public Error {
 public:
    NonConvergence(const std::string& what, double best_residual)
        : Error(what), best_residual_(best_residual) {}

    double best_residual() const noexcept { return best_residual_; }

 private:
    double best_residual_;
};

}  // namespace infsup

#pragma once

#include <stdexcept>
#include <string>

namespace gsq {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain (negative state, infeasible action).
class DomainError : public Error {
public:
    using Error::Error;
};

// Requested truncation level cannot hold the policy or the tail mass.
class TruncationError : public Error {
public:
    using Error::Error;
};

// Policy does not satisfy d(n)μ > λ on its tail.
class StabilityError : public Error {
public:
    using Error::Error;
};

// Linear-algebra or numerical breakdown.
class SolverError : public Error {
public:
    using Error::Error;
};

// Enumeration would exceed its guard.
class GuardError : public Error {
public:
    using Error::Error;
};

} // namespace gsq

#pragma once

#include <stdexcept>
#include <string>

namespace hypoheat {

/// Base of every error raised by the library. Subclasses map onto the CLI
/// exit codes: argument/io problems are usage errors, the rest numerical.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition on an argument (wrong group, bad size, p < 1, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Input outside the domain where a construction makes sense (mollifier
/// support exceeding the box, under-resolved regularisation).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Operation needs a capability the current setup cannot afford, e.g. a
/// dense spectral decomposition above the dof limit.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Time stepping cannot proceed with the requested step.
class StabilityError : public Error {
public:
    using Error::Error;
};

/// Fixed-point iteration failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Input is valid but degenerate for the requested quantity (0/0).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace hypoheat

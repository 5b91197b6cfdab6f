#pragma once

#include <stdexcept>
#include <string>

namespace gk {

// Base for everything thrown by the library. Subclasses map onto the CLI
// exit codes: usage/contract -> 2, data/format -> 3, numeric -> 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller misuse: bad arguments, missing inputs, violated preconditions.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Argument outside an operation's documented domain (shape mismatch,
// out-of-limit joint values, negative dimensions).
class DomainError : public UsageError {
public:
    explicit DomainError(const std::string& msg) : UsageError(msg) {}
};

// Malformed or structurally inconsistent external data (OBJ records,
// checkpoint headers, dataset indices).
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Non-finite values, diverging training, failed numeric procedures.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Kinematic singularity: a closed-loop constraint has no solution at the
// requested configuration.
class SingularityError : public DomainError {
public:
    explicit SingularityError(const std::string& msg) : DomainError(msg) {}
};

}  // namespace gk

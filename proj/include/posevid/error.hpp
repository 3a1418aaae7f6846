#pragma once

#include <stdexcept>
#include <string>

namespace posevid {

// Base of every error the library throws. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes or grid sizes disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Argument outside the operation's domain (empty inputs, bad indices, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Function evaluation produced a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

// Malformed file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

// Attention extraction policy could not be satisfied.
class PolicyError : public Error {
public:
    using Error::Error;
};

}  // namespace posevid

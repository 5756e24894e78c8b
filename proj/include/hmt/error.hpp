#pragma once

#include <stdexcept>
#include <string>

namespace hmt {

// Base for every error raised by the library. The CLI maps the subclasses
// onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape mismatch, bad index...).
class ContractError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Missing, corrupt or inconsistent files on disk.
class DataError : public Error {
public:
    using Error::Error;
};

// Non-finite values or degenerate geometry during evaluation.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace hmt

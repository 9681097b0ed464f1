#pragma once

#include <stdexcept>
#include <string>

namespace gem {

// Base for every error the toolkit raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input violates a documented invariant or precondition (CLI exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A file is readable but its contents are not a valid container (bad magic,
// truncation, malformed header). Treated as a validation failure by the CLI.
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Not enough samples to fit the requested model.
class InsufficientDataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Filesystem failure: missing file, unwritable path, short write (CLI exit code 1).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gem

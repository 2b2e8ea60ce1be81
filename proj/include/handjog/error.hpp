#pragma once

#include <stdexcept>
#include <string>

namespace handjog {

/// Base for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, out-of-range arguments, shape mismatches.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Failure while running an otherwise valid request (divergence, I/O).
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

}  // namespace handjog

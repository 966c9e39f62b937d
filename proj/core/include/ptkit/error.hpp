#pragma once

#include <stdexcept>
#include <string>

namespace ptkit {

// Bad input, bad configuration or a violated precondition. The CLI maps these
// to exit status 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Failure while doing the work (I/O, remote model, ...). Exit status 2.
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ptkit

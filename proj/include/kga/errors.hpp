#pragma once

#include <stdexcept>
#include <string>

namespace kga {

// Error taxonomy shared by every module. The CLI maps these onto
// machine-parseable categories and exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

struct NotFound : Error {
    using Error::Error;
};

// A caller broke an internal contract (mutating frozen state, overlapping
// overrides, non-deterministic loss passed to the gradient checker).
struct ContractViolation : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace kga

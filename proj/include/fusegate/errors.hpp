#pragma once

#include <stdexcept>
#include <string>

namespace fusegate {

// Error taxonomy shared by all modules. Every failure mode thrown by the
// library is one of these, so callers can catch by contract category.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes do not line up (matmul, concat, split, forward input).
struct DimensionError : Error {
  using Error::Error;
};

// A window/kernel extent exceeds the available length.
struct WindowError : Error {
  using Error::Error;
};

// Invalid configuration: bad hyperparameter, broken layer chain,
// malformed group spec, unknown config key.
struct ConfigError : Error {
  using Error::Error;
};

// Class index out of range or unknown label token.
struct LabelError : Error {
  using Error::Error;
};

// Malformed input data (CSV rows, stream too short).
struct DataError : Error {
  using Error::Error;
};

// An API precondition was violated (non-scalar loss, missing gradient).
struct ContractError : Error {
  using Error::Error;
};

// Filesystem failures while writing reports or archives.
struct IoError : Error {
  using Error::Error;
};

// Operation not applicable to the given object (e.g. weight inspection
// of a non-gated model).
struct UnsupportedError : Error {
  using Error::Error;
};

}  // namespace fusegate

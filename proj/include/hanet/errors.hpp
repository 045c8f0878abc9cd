#pragma once

#include <stdexcept>
#include <string>

namespace hanet {

// Error taxonomy. Everything derives from Error so callers can catch the
// whole family; the CLI maps the concrete types onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up for the requested operation.
struct DimensionError : Error {
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Token id outside the vocabulary.
struct VocabError : Error {
  using Error::Error;
};

// Bad configuration value or inconsistent config combination.
struct ConfigError : Error {
  using Error::Error;
};

// Corpus/embedding ingestion failure (missing path, malformed file).
struct DataError : Error {
  using Error::Error;
};

// Malformed or incompatible checkpoint container.
struct CheckpointError : Error {
  using Error::Error;
};

// Non-finite value detected where training must abort.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace hanet

#pragma once

#include <stdexcept>
#include <string>

namespace dmn {

// All recoverable failures are reported as exceptions derived from Error.
// Callers that need to distinguish categories catch the specific subclass;
// the CLI maps any Error to a nonzero exit code with the message on stderr.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between tensors (names both shapes in the message).
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Math outside the defined domain, e.g. log of a non-positive value.
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// An API precondition was violated (bad gate value, non-scalar backward root,
// probability vector that does not sum to one, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Caller-supplied data is invalid: out-of-range index, malformed sequence
// framing, unknown identifier.
struct InputError : Error {
    explicit InputError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration value (non-positive episode count, bad fusion mode).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Malformed text input (JSON, embeddings file): message carries position info.
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Malformed binary input (feature files, checkpoints): bad magic, version,
// or truncation, with expected-vs-actual counts where applicable.
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Filesystem-level failure: missing file, unwritable path.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace dmn

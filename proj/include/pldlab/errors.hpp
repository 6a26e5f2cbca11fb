#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pldlab {

// Base class for everything this library throws on purpose. Catching
// pldlab::Error at a CLI boundary is enough to turn any library failure
// into a clean diagnostic instead of a stack trace.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/operator shape mismatch. Message always names both shapes.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Character outside the configured charset, bad label index, etc.
class VocabError : public Error {
 public:
  explicit VocabError(const std::string& msg) : Error(msg) {}
};

// Malformed serialized file. Carries the byte offset where parsing gave up.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::uint64_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::uint64_t byte_offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Invalid configuration value (preset mismatch, nonsensical hyperparameter).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Dataset-level problem: empty dataset, label too long, image size mismatch.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Violation of an internal invariant that should be impossible to reach via
// the public API (e.g. a fully masked attention row). Indicates a bug.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

}  // namespace pldlab

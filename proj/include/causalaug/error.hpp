#pragma once

#include <stdexcept>
#include <string>

namespace causalaug {

// Base for all toolkit errors. CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument to an operation (empty input, length mismatch, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed input document or record.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Required field missing from a record or element.
class FieldError : public Error {
 public:
  using Error::Error;
};

// Backend or validator could not be reached / returned a failure status.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Backend reachable but response violates the wire contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Token/annotation misalignment in the adversarial module.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

// All generation retries exhausted without a usable candidate.
class GenerationError : public Error {
 public:
  std::string last_candidate;
  explicit GenerationError(const std::string& msg, std::string last = {})
      : Error(msg), last_candidate(std::move(last)) {}
};

// Operation refused because a configured bound would be exceeded.
class RefusalError : public Error {
 public:
  using Error::Error;
};

}  // namespace causalaug

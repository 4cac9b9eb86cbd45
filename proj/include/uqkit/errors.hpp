#pragma once

#include <stdexcept>
#include <string>

namespace uq {

// Root of the library's exception hierarchy. Catch this to handle any
// engine-level failure; per-prompt errors are isolated by the harness.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Network / HTTP failure after bounded retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Requested feature the provider cannot deliver (e.g. logprobs).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Provider returned a zero-length choice set.
class EmptyResponseError : public Error {
 public:
  using Error::Error;
};

// Invariant or precondition violation on a domain value.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class ZeroVectorError : public Error {
 public:
  using Error::Error;
};

// Replay-mode cache lookup found no stored record.
class ReplayMissError : public Error {
 public:
  using Error::Error;
};

// Stored cache record failed its integrity digest.
class CacheCorruptionError : public Error {
 public:
  using Error::Error;
};

class MissingLogprobsError : public Error {
 public:
  using Error::Error;
};

class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

// Judge reply could not be mapped to an admissible template value.
// Recoverable: the panel retries once with a stricter instruction.
class ParseFailure : public Error {
 public:
  using Error::Error;
};

class MissingScorerError : public Error {
 public:
  using Error::Error;
};

// Metric requires both classes (or at least one positive) in the labels.
class DegenerateLabelsError : public Error {
 public:
  using Error::Error;
};

class EmptyScorerSetError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration: unknown scorer name, missing mode field, etc.
// Fatal: aborts before any generation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset file problem; messages carry 1-based line numbers.
class DatasetError : public Error {
 public:
  using Error::Error;
};

}  // namespace uq

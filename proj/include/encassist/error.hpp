#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace encassist {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input record: unknown label, missing field, malformed line.
class IngestError : public Error {
 public:
  using Error::Error;
};

class DuplicateIdError : public Error {
 public:
  using Error::Error;
};

/// A parsed record violates a schema invariant (probs sum, embedding length).
class SchemaError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Remote backend could not be reached after all retries.
class BackendUnavailable : public Error {
 public:
  BackendUnavailable(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class UndefinedSimilarity : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

/// Completion was the forbidden "mixed" label.
class RefusedLabel : public Error {
 public:
  explicit RefusedLabel(std::string raw)
      : Error("completion used the refused label 'mixed'"), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class UnparseableCompletion : public Error {
 public:
  explicit UnparseableCompletion(std::string raw)
      : Error("unparseable completion: \"" + raw + "\""), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Network-level failure, timeout, or retries exhausted on 429/5xx.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// Non-retryable 4xx from the chat endpoint.
class RequestError : public Error {
 public:
  RequestError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class PairingError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace encassist

#pragma once

#include <stdexcept>
#include <string>

namespace autoprompt {

// Root of every error thrown by the library. The CLI maps each subclass to
// an exit code (see ExitCode below).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

// Backend did not answer, or answered with a non-2xx status.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// Backend lacks a feature the operation needs (logits, echo mode, vocabulary).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Token span does not line up with the backend's tokenization.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

// Sparse logits from different contexts share no token at a decode step.
class CoverageError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kBackend = 3,
  kEvaluation = 4,
};

}  // namespace autoprompt

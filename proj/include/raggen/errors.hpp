#pragma once

#include <stdexcept>
#include <string>

namespace raggen {

// Base class for all pipeline failures. Subtypes map to CLI exit codes:
// ConfigError -> 2, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class RetrievalError : public Error {
 public:
  using Error::Error;
};

// Generation backend failure after all retries were exhausted.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what, int attempts = 1)
      : Error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

// The backend answered but the completion was empty; callers decide whether
// to re-sample or count the item as malformed.
class EmptyOutputError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace raggen

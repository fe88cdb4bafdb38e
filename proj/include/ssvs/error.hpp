#pragma once

#include <stdexcept>
#include <string>

namespace ssvs {

// Error hierarchy. Every failure surfaced by the library derives from Error so
// callers (the CLI in particular) can catch one type and report the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad model/spec/config: dimensions, unsupported family/link, bad hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN or otherwise unusable numeric input.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Argument outside the support of a density (negative scale, lambda < 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DecompositionError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

// Input files: CSV/JSON problems, with location in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssvs

#pragma once

#include <stdexcept>
#include <string>

namespace seqrec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// An input violates a documented invariant (labels, one-hot encodings, empty photos...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unknown configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or parse failure; the message carries the path (and line, where known).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace seqrec

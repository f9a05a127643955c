#pragma once

#include <stdexcept>
#include <string>

namespace amisr {

// Base for every error this library raises. Callers that only care about
// "something went wrong in amisr" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor extents, bad channel/head splits, odd spatial sizes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf surfaced in an op output, a loss, or a finite-difference probe.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss; the message carries step, lr and the
// last gradient norm.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Misuse of the differentiation tape (non-scalar loss, second backward).
class TapeError : public Error {
 public:
  using Error::Error;
};

// Invalid ArchConfig / RunConfig / Manifest contents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed checkpoint or image file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures: missing files, unreadable directories.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace amisr

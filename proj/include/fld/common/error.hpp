#pragma once

#include <stdexcept>
#include <string>

namespace fld {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array or layer dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf, undefined quantities, divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupted input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fld

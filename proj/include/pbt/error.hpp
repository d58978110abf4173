#pragma once

#include <stdexcept>
#include <string>

namespace pbt {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A position or index lies outside the valid range.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// select() asked for an occurrence that does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// rank()/select() on a symbol without rank support.
class UnsupportedSymbolError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupted serialized tree.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Broken construction invariant; indicates a bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace pbt

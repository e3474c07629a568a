#pragma once

#include <stdexcept>
#include <string>

namespace t2t {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input data does not follow the expected corpus or config layout.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes do not conform for a primitive.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a precondition (bad token id, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint file is unreadable, truncated or inconsistent.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace t2t

#pragma once

#include <stdexcept>
#include <string>

namespace mog {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (empty list, bad ratio, out-of-range index, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input value outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A dataset or graph violates a structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A required file is missing.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk content.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A meta-path chain is inconsistent with the graph schema.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// An API usage contract was broken (e.g. stale forward cache).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace mog

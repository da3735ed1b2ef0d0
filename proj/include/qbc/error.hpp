#pragma once

#include <stdexcept>
#include <string>

namespace qbc {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions or subsystem shapes do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A parameter is outside the domain of the operation (n < 3, i out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A measurement family is incomplete, non-positive, or otherwise invalid.
class MeasurementError : public Error {
 public:
  using Error::Error;
};

/// A party touched a register it does not own.
class OwnershipError : public Error {
 public:
  using Error::Error;
};

/// Messages arrived in an order the protocol does not allow, or were malformed.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A wire frame could not be decoded.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// The requested attack dimension is beyond what the device model can resolve.
class DeviceLimitError : public Error {
 public:
  using Error::Error;
};

}  // namespace qbc

#pragma once

#include <stdexcept>
#include <string>

namespace framerepeat {

// Base of every error thrown by the library. The CLI maps the concrete
// subclass onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised by the sample and checkpoint loaders.
class LoadError : public Error {
 public:
  enum class Kind { MissingFile, ByteLength, Shape, NonFinite, Range, Format, Version };

  LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

// Replay oracle asked for something it never recorded.
class CacheMissError : public OracleError {
 public:
  using OracleError::OracleError;
};

class TransportError : public OracleError {
 public:
  using OracleError::OracleError;
};

class ProtocolError : public OracleError {
 public:
  using OracleError::OracleError;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace framerepeat

#pragma once

#include <stdexcept>
#include <string>

namespace falcon {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad magic number or unparsable file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Two inputs that must agree do not (e.g. image and label counts).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Open/read/write failure, including truncated files.
class IoError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// Unknown name looked up in a registry (perturbation kinds, presets).
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// Temperature fitting could not produce a meaningful result.
class FitError : public Error {
 public:
  using Error::Error;
};

/// A training loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration or override.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A report document does not match the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace falcon

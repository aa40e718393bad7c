#pragma once

#include <stdexcept>
#include <string>

namespace hmtl {

// Base of every error raised by the library. Subclasses mirror the failure
// categories callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class LabelError : public Error { using Error::Error; };
class DegenerateBatchError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class CompatibilityError : public Error { using Error::Error; };

}  // namespace hmtl

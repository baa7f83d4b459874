#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace valmon {

/// Base class for every error raised by the library. `code()` is a stable
/// machine-readable name (e.g. "MissingColumn") that ends up in reports.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string &message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string &code() const noexcept { return code_; }

 private:
  std::string code_;
};

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string &name)
      : Error("MissingColumn", "column '" + name + "' not found"), name_(name) {}
  const std::string &name() const noexcept { return name_; }

 private:
  std::string name_;
};

class TypeParseError : public Error {
 public:
  TypeParseError(std::size_t row, const std::string &column, const std::string &token)
      : Error("TypeParseError", "row " + std::to_string(row) + ", column '" + column +
                                    "': cannot parse '" + token + "'"),
        row_(row), column_(column), token_(token) {}

  std::size_t row() const noexcept { return row_; }
  const std::string &column() const noexcept { return column_; }
  const std::string &token() const noexcept { return token_; }

 private:
  std::size_t row_;
  std::string column_;
  std::string token_;
};

/// Errors that carry only a code and a message.
#define VALMON_SIMPLE_ERROR(Name)                                            \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string &message) : Error(#Name, message) {}     \
  };

VALMON_SIMPLE_ERROR(DuplicateHeader)
VALMON_SIMPLE_ERROR(SchemaError)
VALMON_SIMPLE_ERROR(SchemaMismatch)
VALMON_SIMPLE_ERROR(EmptyDataset)
VALMON_SIMPLE_ERROR(EmptySample)
VALMON_SIMPLE_ERROR(InvalidArgument)
VALMON_SIMPLE_ERROR(AllMissingColumn)
VALMON_SIMPLE_ERROR(StrategyKindMismatch)
VALMON_SIMPLE_ERROR(TooFewRows)
VALMON_SIMPLE_ERROR(MissingValues)
VALMON_SIMPLE_ERROR(DimensionMismatch)
VALMON_SIMPLE_ERROR(UnknownFeature)
VALMON_SIMPLE_ERROR(InsufficientCalibration)
VALMON_SIMPLE_ERROR(ModeMismatch)
VALMON_SIMPLE_ERROR(MissingQuantileColumns)
VALMON_SIMPLE_ERROR(LengthMismatch)
VALMON_SIMPLE_ERROR(RangeError)
VALMON_SIMPLE_ERROR(KExceedsRows)
VALMON_SIMPLE_ERROR(MetricIncompatible)
VALMON_SIMPLE_ERROR(EmptyDevSet)
VALMON_SIMPLE_ERROR(NoTimestamps)
VALMON_SIMPLE_ERROR(IoError)

#undef VALMON_SIMPLE_ERROR

/// Raised by `parse_config`; `pointer()` is a JSON pointer to the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string &message)
      : Error("ConfigError", pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string &pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

/// Failure talking to an external model process.
class ModelProtocolError : public Error {
 public:
  enum class Kind { exit_code, parse, count, timeout, spawn };

  ModelProtocolError(Kind kind, const std::string &message)
      : Error("ModelProtocolError", message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

const char *to_string(ModelProtocolError::Kind kind);

}  // namespace valmon

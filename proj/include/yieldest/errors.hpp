#pragma once

#include <stdexcept>
#include <string>

namespace yieldest {

/// Base of every error raised by the toolkit. `kind()` is a stable tag used
/// by the CLI diagnostics and the HTTP status mapping.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define YIELDEST_ERROR_TYPE(Name, tag)                                 \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(tag, what) {}       \
  };

YIELDEST_ERROR_TYPE(InvalidConfigError, "invalid-config")
YIELDEST_ERROR_TYPE(InsufficientDataError, "insufficient-data")
YIELDEST_ERROR_TYPE(NumericalError, "numerical-conditioning")
YIELDEST_ERROR_TYPE(RangeError, "range")
YIELDEST_ERROR_TYPE(NotFoundError, "not-found")
YIELDEST_ERROR_TYPE(EmptyModelError, "empty-model")
YIELDEST_ERROR_TYPE(ValidationError, "validation")
YIELDEST_ERROR_TYPE(ReferenceError, "reference")
YIELDEST_ERROR_TYPE(DivisionError, "division")
YIELDEST_ERROR_TYPE(IoError, "io")
YIELDEST_ERROR_TYPE(IncompatibleFormatError, "incompatible-format")
YIELDEST_ERROR_TYPE(ConflictError, "conflict")

#undef YIELDEST_ERROR_TYPE

/// Parse failure with file and line context.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace yieldest

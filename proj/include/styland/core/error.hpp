#pragma once

#include <stdexcept>
#include <string>

namespace styland {

enum class ErrorKind {
  shape_mismatch,
  out_of_range,
  not_one_hot,
  invalid_resolution,
  invalid_argument,
  order_violation,
  non_finite,
  io,
  format,
};

const char* to_string(ErrorKind kind);

/// Base of all errors raised by the library; `kind()` lets callers (CLI exit
/// codes, HTTP status mapping) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  [[nodiscard]] ErrorKind kind() const { return kind_; }
  [[nodiscard]] const std::string& message() const { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace styland

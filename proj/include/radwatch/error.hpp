#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace radwatch {

enum class ErrorCode {
  MalformedRow,
  NonMonotonicTimestamp,
  EmptyFile,
  TooFewRows,
  DimensionMismatch,
  DegenerateData,
  BadHyperparameter,
  SingularCovariance,
  BadK,
  LengthMismatch,
  EmptyAfterTrim,
  HorizonTooShort,
  BothZero,
  InvalidArgument,
  Format,
  Io,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (the CLI in
// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  // 1-based input line for parse errors.
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

  // Same error with "context: " in front of the message.
  Error in_context(const std::string& context) const;

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> line_;
};

}  // namespace radwatch

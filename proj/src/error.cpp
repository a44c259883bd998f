#include "radwatch/error.hpp"

namespace radwatch {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::BadHyperparameter: return "BadHyperparameter";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyAfterTrim: return "EmptyAfterTrim";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::BothZero: return "BothZero";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

static std::string decorate(ErrorCode code, const std::string& message,
                            std::optional<std::size_t> line) {
  std::string out = to_string(code);
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)), code_(code), message_(message), line_(line) {}

Error Error::in_context(const std::string& context) const {
  return Error(code_, context + ": " + message_, line_);
}

}  // namespace radwatch

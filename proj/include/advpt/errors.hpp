#pragma once

#include <stdexcept>
#include <string>

namespace advpt {

// Error taxonomy. The CLI maps each kind onto one of four exit-code
// families: configuration, data, numeric, integrity.
enum class ErrorKind {
  Config,      // invalid or missing configuration
  Input,       // bad value/shape at an operation boundary
  Vocabulary,  // token or class name not present in the vocabulary
  Dimension,   // dimension mismatch between artifacts
  Io,          // filesystem failure
  Numeric,     // non-finite values or undefined math
  Divergence,  // optimization produced a non-finite loss
  Format,      // unknown magic or unsupported format version
  Corruption,  // checksum or length validation failed
  Integrity,   // frozen-parameter or provenance violation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Input: return "input";
    case ErrorKind::Vocabulary: return "vocabulary";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Format: return "format";
    case ErrorKind::Corruption: return "corruption";
    case ErrorKind::Integrity: return "integrity";
  }
  return "unknown";
}

// Exit codes: 2 config, 3 data, 4 numeric, 5 integrity.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return 2;
    case ErrorKind::Input:
    case ErrorKind::Vocabulary:
    case ErrorKind::Dimension:
    case ErrorKind::Io:
      return 3;
    case ErrorKind::Numeric:
    case ErrorKind::Divergence:
      return 4;
    case ErrorKind::Format:
    case ErrorKind::Corruption:
    case ErrorKind::Integrity:
      return 5;
  }
  return 1;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace advpt

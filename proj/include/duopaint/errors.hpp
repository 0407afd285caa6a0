#pragma once

#include <stdexcept>
#include <string>

namespace duopaint {

enum class ErrorCode {
  NonPositiveDepth,
  InvalidDepth,
  ParseError,
  UnsupportedElement,
  CycleError,
  MissingJointValue,
  DegenerateCorrespondences,
  NoCorrespondences,
  RegistrationFailed,
  DegenerateHand,
  SourceUnavailable,
  MissingMesh,
  BackgroundMissing,
  NoFillAvailable,
  IkFailed,
  ManifestError,
  SchemaError,
  MissingAction,
  IoError,
  ConfigError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedElement: return "UnsupportedElement";
    case ErrorCode::CycleError: return "CycleError";
    case ErrorCode::MissingJointValue: return "MissingJointValue";
    case ErrorCode::DegenerateCorrespondences: return "DegenerateCorrespondences";
    case ErrorCode::NoCorrespondences: return "NoCorrespondences";
    case ErrorCode::RegistrationFailed: return "RegistrationFailed";
    case ErrorCode::DegenerateHand: return "DegenerateHand";
    case ErrorCode::SourceUnavailable: return "SourceUnavailable";
    case ErrorCode::MissingMesh: return "MissingMesh";
    case ErrorCode::BackgroundMissing: return "BackgroundMissing";
    case ErrorCode::NoFillAvailable: return "NoFillAvailable";
    case ErrorCode::IkFailed: return "IkFailed";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::MissingAction: return "MissingAction";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Single exception type for the whole library; tests and pipeline code
/// dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace duopaint

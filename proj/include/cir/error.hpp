#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cir {

enum class ErrorCode {
  IoError,
  UnsupportedHeaderField,
  SizeMismatch,
  InvalidVolume,
  DegenerateTarget,
  EmptyMask,
  NonManifoldOutput,
  OpenSurface,
  MalformedFile,
  InvalidMesh,
  NotGenusZero,
  NonManifold,
  NoBijectiveMap,
  ConnectivityMismatch,
  GridTooCoarse,
  EmptySet,
  DimMismatch,
  ShapeMismatch,
  MissingComponent,
  DegenerateLabels,
  BranchWidthMismatch,
  LengthMismatch,
  NonFiniteWeights,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnsupportedHeaderField: return "UnsupportedHeaderField";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::InvalidVolume: return "InvalidVolume";
    case ErrorCode::DegenerateTarget: return "DegenerateTarget";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NonManifoldOutput: return "NonManifoldOutput";
    case ErrorCode::OpenSurface: return "OpenSurface";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::NotGenusZero: return "NotGenusZero";
    case ErrorCode::NonManifold: return "NonManifold";
    case ErrorCode::NoBijectiveMap: return "NoBijectiveMap";
    case ErrorCode::ConnectivityMismatch: return "ConnectivityMismatch";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingComponent: return "MissingComponent";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::BranchWidthMismatch: return "BranchWidthMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteWeights: return "NonFiniteWeights";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace cir

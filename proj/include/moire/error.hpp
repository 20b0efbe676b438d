#pragma once

#include <stdexcept>
#include <string>

namespace moire {

enum class ErrorCode {
  ShapeMismatch,
  EmptyOutput,
  ChannelNotDivisible,
  SpatialNotDivisible,
  BadSplit,
  BadPad,
  NonFinite,
  UnsupportedOp,
  NotScalarLoss,
  OddSpatialDim,
  NotThreeByThree,
  OddChannels,
  BadConfig,
  NotRGB,
  IoError,
  BadMagic,
  VersionUnsupported,
  CrcMismatch,
  ConfigMismatch,
  UnsupportedPng,
  EmptyDataset,
  MinSizeViolation,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace moire

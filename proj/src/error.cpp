#include "moire/error.hpp"

namespace moire {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyOutput: return "EmptyOutput";
    case ErrorCode::ChannelNotDivisible: return "ChannelNotDivisible";
    case ErrorCode::SpatialNotDivisible: return "SpatialNotDivisible";
    case ErrorCode::BadSplit: return "BadSplit";
    case ErrorCode::BadPad: return "BadPad";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::UnsupportedOp: return "UnsupportedOp";
    case ErrorCode::NotScalarLoss: return "NotScalarLoss";
    case ErrorCode::OddSpatialDim: return "OddSpatialDim";
    case ErrorCode::NotThreeByThree: return "NotThreeByThree";
    case ErrorCode::OddChannels: return "OddChannels";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::NotRGB: return "NotRGB";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::CrcMismatch: return "CrcMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::UnsupportedPng: return "UnsupportedPng";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MinSizeViolation: return "MinSizeViolation";
  }
  return "Unknown";
}

}  // namespace moire

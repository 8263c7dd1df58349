#include "seedlab/error.hpp"

namespace seedlab {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kVersion: return "VersionError";
    case ErrorCode::kTruncation: return "TruncationError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kDegenerateChannel: return "DegenerateChannel";
    case ErrorCode::kDimension: return "DimensionError";
    case ErrorCode::kPerplexity: return "PerplexityError";
    case ErrorCode::kMissingCell: return "MissingCell";
    case ErrorCode::kSampleSize: return "SampleSizeError";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNumerical: return "NumericalError";
    case ErrorCode::kMissingScore: return "MissingScore";
    case ErrorCode::kSeedSetMismatch: return "SeedSetMismatch";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kSplitOverlap: return "OverlapError";
    case ErrorCode::kCount: return "CountError";
    case ErrorCode::kNoUsablePrompts: return "NoUsablePrompts";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kSchedule: return "ScheduleError";
    case ErrorCode::kUsage: return "UsageError";
  }
  return "Error";
}

ExitCategory exit_category(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo:
      return ExitCategory::kIo;
    case ErrorCode::kNumerical:
    case ErrorCode::kDegenerateChannel:
    case ErrorCode::kSampleSize:
    case ErrorCode::kSchedule:
      return ExitCategory::kNumeric;
    case ErrorCode::kUsage:
    case ErrorCode::kDimension:
    case ErrorCode::kPerplexity:
    case ErrorCode::kCount:
      return ExitCategory::kUsage;
    default:
      return ExitCategory::kValidation;
  }
}

}  // namespace seedlab

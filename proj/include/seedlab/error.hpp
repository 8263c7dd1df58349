#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace seedlab {

enum class ErrorCode {
  kParse,
  kValidation,
  kVersion,
  kTruncation,
  kIo,
  kDegenerateChannel,
  kDimension,
  kPerplexity,
  kMissingCell,
  kSampleSize,
  kDimensionMismatch,
  kNumerical,
  kMissingScore,
  kSeedSetMismatch,
  kEmptySplit,
  kSplitOverlap,
  kCount,
  kNoUsablePrompts,
  kShapeMismatch,
  kEmptyMask,
  kSchedule,
  kUsage,
};

// Process exit codes used by the command-line front end.
enum class ExitCategory : int {
  kUsage = 1,
  kValidation = 2,
  kNumeric = 3,
  kIo = 4,
};

std::string_view error_name(ErrorCode code) noexcept;
ExitCategory exit_category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace seedlab

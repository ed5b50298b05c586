#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gsadvisor {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kFormatError,
  kVersionMismatch,
  kDuplicateId,
  kMissingEmbedding,
  kEmptyCorpus,
  kSchemaMismatch,
  kNonFiniteLoss,
  kBudgetExceeded,
  kSupportMismatch,
  kDivisionByZero,
  kOrientationConflict,
  kScoreSchemaMismatch,
  kProviderUnreachable,
  kTimeout,
  kMalformedResponse,
  kHttpStatus,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gsadvisor

#include "gsadvisor/error.hpp"

namespace gsadvisor {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kBudgetExceeded: return "BudgetExceeded";
    case ErrorCode::kSupportMismatch: return "SupportMismatch";
    case ErrorCode::kDivisionByZero: return "DivisionByZero";
    case ErrorCode::kOrientationConflict: return "OrientationConflict";
    case ErrorCode::kScoreSchemaMismatch: return "ScoreSchemaMismatch";
    case ErrorCode::kProviderUnreachable: return "ProviderUnreachable";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kHttpStatus: return "HTTPStatus";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace gsadvisor

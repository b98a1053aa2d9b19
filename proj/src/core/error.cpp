#include "dlcz/error.hpp"

namespace dlcz {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kTimeOrder: return "time-order";
    case ErrorCode::kEmptyEnsemble: return "empty-ensemble";
    case ErrorCode::kNoRoot: return "no-root";
    case ErrorCode::kInsufficientStatistics: return "insufficient-statistics";
    case ErrorCode::kBudgetExceeded: return "budget-exceeded";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNotConverged: return "not-converged";
  }
  return "unknown";
}

void throw_invalid(const std::string& message) {
  throw Error(ErrorCode::kInvalidParameter, message);
}

}  // namespace dlcz

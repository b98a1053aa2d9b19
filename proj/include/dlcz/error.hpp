#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dlcz {

enum class ErrorCode {
  kInvalidParameter,
  kTimeOrder,
  kEmptyEnsemble,
  kNoRoot,
  kInsufficientStatistics,
  kBudgetExceeded,
  kConfig,
  kParse,
  kIo,
  kNotConverged,
};

const char* error_code_name(ErrorCode code) noexcept;

// Single exception type for the library; the code tells callers (and the C
// API) which failure class occurred.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Config and parse failures carry the offending location.
class LocatedError : public Error {
 public:
  LocatedError(ErrorCode code, const std::string& message, std::size_t line,
               std::string field)
      : Error(code, message), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

[[noreturn]] void throw_invalid(const std::string& message);

inline void require(bool condition, const std::string& message) {
  if (!condition) throw_invalid(message);
}

}  // namespace dlcz

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace overlay {

enum class ErrorCode {
  not_found,
  gone,
  invalid_argument,
  parse_error,
  validation,
  conflict,
  operation_not_supported,
  format_unavailable,
  model_integrity,
  dissemination,
  not_available,
  brand_missing,
  not_represented,
  no_metadata,
  storage,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the repository carries a code so that the HTTP and
// CLI layers can map it without string matching. Validation failures list
// each offending item in `details`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::vector<std::string> details = {})
      : std::runtime_error(std::move(message)), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace overlay

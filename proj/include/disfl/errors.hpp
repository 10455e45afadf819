#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace disfl {

enum class ErrorCode {
  FormatError,
  LengthMismatch,
  AlignmentError,
  IoError,
  RangeError,
  PreconditionError,
  LexiconError,
  BudgetUnreachable,
  ShapeError,
  NumericError,
  EmptyBatch,
  VocabMismatch,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace disfl

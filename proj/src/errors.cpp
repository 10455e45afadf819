#include "disfl/errors.hpp"

namespace disfl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FormatError: return "FORMAT_ERROR";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::AlignmentError: return "ALIGNMENT_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::RangeError: return "RANGE_ERROR";
    case ErrorCode::PreconditionError: return "PRECONDITION_ERROR";
    case ErrorCode::LexiconError: return "LEXICON_ERROR";
    case ErrorCode::BudgetUnreachable: return "BUDGET_UNREACHABLE";
    case ErrorCode::ShapeError: return "SHAPE_ERROR";
    case ErrorCode::NumericError: return "NUMERIC_ERROR";
    case ErrorCode::EmptyBatch: return "EMPTY_BATCH";
    case ErrorCode::VocabMismatch: return "VOCAB_MISMATCH";
    case ErrorCode::ConfigError: return "CONFIG_ERROR";
  }
  return "UNKNOWN_ERROR";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace disfl

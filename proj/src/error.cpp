#include "voice_ehr/error.hpp"

namespace voice_ehr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConsentAlreadyRecorded: return "ConsentAlreadyRecorded";
    case ErrorCode::ConsentRequired: return "ConsentRequired";
    case ErrorCode::PageIncomplete: return "PageIncomplete";
    case ErrorCode::WrongPage: return "WrongPage";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::CohortViolation: return "CohortViolation";
    case ErrorCode::DuplicatePart: return "DuplicatePart";
    case ErrorCode::SessionFrozen: return "SessionFrozen";
    case ErrorCode::SessionAbandoned: return "SessionAbandoned";
    case ErrorCode::UnknownPrompt: return "UnknownPrompt";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TokenExpired: return "TokenExpired";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::RangeConflict: return "RangeConflict";
    case ErrorCode::RangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::DecodeFailure: return "DecodeFailure";
    case ErrorCode::IncompleteUpload: return "IncompleteUpload";
    case ErrorCode::SessionNotFrozen: return "SessionNotFrozen";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::EmptySignal: return "EmptySignal";
    case ErrorCode::AsrUnavailable: return "AsrUnavailable";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::MissingRecording: return "MissingRecording";
    case ErrorCode::MissingTranscript: return "MissingTranscript";
    case ErrorCode::MissingManualField: return "MissingManualField";
    case ErrorCode::LlmUnavailable: return "LlmUnavailable";
    case ErrorCode::UnparseableRating: return "UnparseableRating";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::DanglingBlobRef: return "DanglingBlobRef";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::Forbidden: return "Forbidden";
    case ErrorCode::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

namespace {
std::string compose(ErrorCode code, const std::string& detail) {
  std::string msg(to_string(code));
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(compose(code, detail)), code_(code), detail_(detail) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace voice_ehr

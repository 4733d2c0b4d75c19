#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voice_ehr {

enum class ErrorCode {
  // protocol
  ConsentAlreadyRecorded,
  ConsentRequired,
  PageIncomplete,
  WrongPage,
  MissingField,
  InvalidField,
  CohortViolation,
  DuplicatePart,
  SessionFrozen,
  SessionAbandoned,
  UnknownPrompt,
  // ingest
  PayloadTooLarge,
  UnsupportedFormat,
  TokenExpired,
  UnknownToken,
  RangeConflict,
  RangeOutOfBounds,
  ChecksumMismatch,
  DecodeFailure,
  IncompleteUpload,
  SessionNotFrozen,
  // signal
  TooShort,
  EmptySignal,
  // transcription / eval
  AsrUnavailable,
  EmptyReference,
  MissingRecording,
  MissingTranscript,
  MissingManualField,
  LlmUnavailable,
  UnparseableRating,
  EmptyInput,
  // storage / service
  NotFound,
  IoFailure,
  DanglingBlobRef,
  CorruptLog,
  Unauthorized,
  Forbidden,
  BadRequest,
};

std::string_view to_string(ErrorCode code);

/// Typed failure raised by every module. `code()` is what callers branch on;
/// `what()` carries a human readable detail such as the offending field name.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail = {});

}  // namespace voice_ehr

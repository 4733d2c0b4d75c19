#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "voice_ehr/audio.hpp"
#include "voice_ehr/domain.hpp"

namespace voice_ehr {

/// P1, P2, P3, P6, P7 -> Always; P4.2 (rainbow) -> RainbowCheckOnly; P4.1, P5 -> Never.
/// UnknownPrompt for a part the prompt does not have.
TranscribePolicy should_transcribe(PromptId prompt, int part);

struct AsrCapabilities {
  std::string engine_tag;
  std::vector<std::string> languages;
  double max_duration_s = 0.0;
};

struct AsrRequest {
  const PcmAudio& audio;
  std::string checksum;  // canonical PCM SHA-256
  PromptPart prompt;
};

/// Speech-to-text engine boundary. transcribe() throws Error(AsrUnavailable) for
/// transient failures; the caller owns retries.
class AsrClient {
 public:
  virtual ~AsrClient() = default;
  virtual AsrCapabilities capabilities() = 0;
  virtual std::string transcribe(const AsrRequest& request) = 0;
};

/// Deterministic engine: canonical checksum -> text. Unknown checksums yield "".
class MockAsr : public AsrClient {
 public:
  explicit MockAsr(std::map<std::string, std::string> texts = {}, std::string engine_tag = "mock-asr-1");

  void set_text(const std::string& checksum, std::string text);
  /// The next `times` calls for this checksum fail (-1: always).
  void fail_on(const std::string& checksum, int times = -1);
  void set_unavailable(bool down);

  AsrCapabilities capabilities() override;
  std::string transcribe(const AsrRequest& request) override;

  int calls() const;
  int calls_for(const std::string& checksum) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> texts_;
  std::map<std::string, int> failures_;
  std::map<std::string, int> calls_by_checksum_;
  std::string engine_tag_;
  bool down_ = false;
  int calls_ = 0;
};

struct TranscribeOptions {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  int concurrency = 4;
  bool force = false;
  /// Replaced in tests to avoid real sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct TranscribeReport {
  int requested = 0;
  int succeeded = 0;
  int failed = 0;
  int skipped_existing = 0;
};

/// Loads canonical audio for a sample (normally BlobStore::read_canonical).
using AudioLoader = std::function<PcmAudio(const AudioSample&)>;

/// Adds a Transcript for every sample whose policy is not Never. Per-sample failures
/// land in record.transcription_failures and never abort the batch. Samples that
/// already carry a transcript from the same engine are skipped unless `force`.
/// Throws AsrUnavailable only when the capability handshake itself fails.
TranscribeReport transcribe_session(SessionRecord& record, AsrClient& client, const AudioLoader& load,
                                    const TranscribeOptions& options = {}, Clock clock = system_clock());

struct WerBreakdown {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int reference_words = 0;
  int hypothesis_words = 0;
  double wer = 0.0;

  int errors() const { return substitutions + insertions + deletions; }
  bool operator==(const WerBreakdown&) const = default;
};

/// Lowercase, ASCII punctuation removed, whitespace-split.
std::vector<std::string> normalize_words(std::string_view text);

/// Word-level Levenshtein alignment; ties prefer substitution. EmptyReference if the
/// normalized reference has no words.
WerBreakdown word_error_rate(std::string_view reference, std::string_view hypothesis);

/// WER of the P4.2 transcript against kRainbowPassage. MissingRecording without one.
WerBreakdown rainbow_quality(const SessionRecord& record);

}  // namespace voice_ehr

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voice_ehr/audio.hpp"
#include "voice_ehr/blob_store.hpp"
#include "voice_ehr/domain.hpp"
#include "voice_ehr/quality.hpp"
#include "voice_ehr/timeutil.hpp"

namespace voice_ehr {

struct ByteRange {
  std::uint64_t start = 0;
  std::uint64_t end = 0;  // exclusive

  std::uint64_t size() const { return end - start; }
  auto operator<=>(const ByteRange&) const = default;
};

/// Sorted, merged (touching ranges coalesce), empty ranges dropped.
std::vector<ByteRange> normalize_ranges(std::vector<ByteRange> ranges);
std::uint64_t total_bytes(const std::vector<ByteRange>& ranges);

struct UploadToken {
  std::string token_id;
  std::string session_id;
  PromptPart prompt;
  std::uint64_t declared_size = 0;
  std::string content_type;
  ContainerFormat format = ContainerFormat::Unknown;
  std::vector<ByteRange> received_ranges;
  Timestamp created_at{};
  Timestamp expires_at{};
  std::optional<std::string> sample_id;  // set once finalized

  std::uint64_t received_bytes() const { return total_bytes(received_ranges); }
};

struct ChunkAck {
  std::string token_id;
  std::uint64_t received_bytes = 0;
  std::uint64_t declared_size = 0;
  bool complete = false;

  bool operator==(const ChunkAck&) const = default;
};

struct UploadLimits {
  std::uint64_t max_bytes = 64ull * 1024 * 1024;
  std::chrono::milliseconds token_ttl = std::chrono::hours(24);
};

/// Resumable chunked uploads persisted under <root>/<token_id>/:
///   token.json   immutable token metadata
///   data.part    sparse file written at chunk offsets
///   ranges.log   one "start end" line per durable chunk (fsynced after the data)
///   sample.json  the finalized AudioSample
/// A restarted manager reloads every token from disk, so a kill at any point loses at
/// most the chunk in flight.
class UploadManager {
 public:
  UploadManager(std::filesystem::path root, BlobStore& blobs, Clock clock = system_clock(),
                UploadLimits limits = {}, AudioDecoder decoder = AudioDecoder{},
                QualityConfig quality = {});

  /// Idempotent per (session, prompt, part) while the token is unexpired. Once the part
  /// is finalized, a begin with another size (or chunks with other bytes) is DuplicatePart.
  UploadToken begin(const std::string& session_id, Cohort cohort, PromptId prompt, int part,
                    std::uint64_t declared_size, const std::string& content_type);

  /// Writes bytes at `offset`. Re-sending bytes already held is a no-op; different
  /// bytes over a held range is RangeConflict.
  ChunkAck append(const std::string& token_id, std::uint64_t offset, std::span<const std::uint8_t> bytes);

  /// `checksum` is the SHA-256 of the uploaded container bytes. Idempotent.
  AudioSample finalize(const std::string& token_id, const std::string& checksum);

  std::optional<UploadToken> token(const std::string& token_id) const;
  std::vector<UploadToken> tokens() const;

 private:
  struct Slot {
    std::mutex mu;
    UploadToken token;
  };

  std::shared_ptr<Slot> slot(const std::string& token_id) const;
  std::filesystem::path dir(const std::string& token_id) const { return root_ / token_id; }
  void load_all();
  std::optional<AudioSample> load_sample(const std::string& token_id) const;

  std::filesystem::path root_;
  BlobStore& blobs_;
  Clock clock_;
  UploadLimits limits_;
  AudioDecoder decoder_;
  QualityConfig quality_;

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::map<std::string, std::string> by_key_;  // "<session>|P4.2" -> token_id
};

}  // namespace voice_ehr

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voice_ehr/audio.hpp"

namespace voice_ehr {

/// Content-addressed, write-once blob directory:
///   <root>/<sha[0:2]>/<sha>.<ext>
/// ext is "pcm" for canonical 16-bit little-endian audio and "orig" for uploaded bytes.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Stores `bytes` (atomic rename, fsynced) and returns their SHA-256. Existing
  /// blobs are left untouched.
  std::string put(std::span<const std::uint8_t> bytes, const std::string& ext);

  std::filesystem::path path_for(const std::string& sha, const std::string& ext) const;
  bool exists(const std::string& sha, const std::string& ext) const;
  /// NotFound if missing.
  std::vector<std::uint8_t> read(const std::string& sha, const std::string& ext) const;
  /// True iff the blob exists and its bytes hash to `sha`.
  bool verify(const std::string& sha, const std::string& ext) const;

  PcmAudio read_canonical(const std::string& sha) const;

 private:
  std::filesystem::path root_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes to a temp sibling, fsyncs, renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace voice_ehr

#include "voice_ehr/blob_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "voice_ehr/error.hpp"
#include "voice_ehr/hash.hpp"

namespace voice_ehr {

namespace fs = std::filesystem;

namespace {

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  static std::atomic<unsigned> counter{0};
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." +
                       std::to_string(counter.fetch_add(1));
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) fail(ErrorCode::IoFailure, tmp.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      fail(ErrorCode::IoFailure, tmp.string() + ": " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoFailure, path.string() + ": " + ec.message());
  fsync_dir(path.parent_path());
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path BlobStore::path_for(const std::string& sha, const std::string& ext) const {
  return root_ / sha.substr(0, 2) / (sha + "." + ext);
}

bool BlobStore::exists(const std::string& sha, const std::string& ext) const {
  return fs::exists(path_for(sha, ext));
}

std::string BlobStore::put(std::span<const std::uint8_t> bytes, const std::string& ext) {
  const std::string sha = sha256_hex(bytes);
  const auto path = path_for(sha, ext);
  if (!fs::exists(path)) write_file_atomic(path, bytes);
  return sha;
}

std::vector<std::uint8_t> BlobStore::read(const std::string& sha, const std::string& ext) const {
  const auto path = path_for(sha, ext);
  if (!fs::exists(path)) fail(ErrorCode::NotFound, "blob " + sha + "." + ext);
  return read_file_bytes(path);
}

bool BlobStore::verify(const std::string& sha, const std::string& ext) const {
  if (!exists(sha, ext)) return false;
  return sha256_hex(read(sha, ext)) == sha;
}

PcmAudio BlobStore::read_canonical(const std::string& sha) const {
  const auto bytes = read(sha, "pcm");
  const auto pcm = pcm16_from_le_bytes(bytes);
  return from_pcm16(pcm, kCanonicalSampleRate);
}

}  // namespace voice_ehr

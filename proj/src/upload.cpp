#include "voice_ehr/upload.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "voice_ehr/codec.hpp"
#include "voice_ehr/error.hpp"
#include "voice_ehr/hash.hpp"

namespace voice_ehr {

namespace fs = std::filesystem;

std::vector<ByteRange> normalize_ranges(std::vector<ByteRange> ranges) {
  std::erase_if(ranges, [](const ByteRange& r) { return r.end <= r.start; });
  std::sort(ranges.begin(), ranges.end());
  std::vector<ByteRange> out;
  for (const auto& r : ranges) {
    if (!out.empty() && r.start <= out.back().end)
      out.back().end = std::max(out.back().end, r.end);
    else
      out.push_back(r);
  }
  return out;
}

std::uint64_t total_bytes(const std::vector<ByteRange>& ranges) {
  std::uint64_t n = 0;
  for (const auto& r : ranges) n += r.size();
  return n;
}

namespace {

std::string key_of(const std::string& session_id, PromptPart p) { return session_id + "|" + to_key(p); }

json token_json(const UploadToken& t) {
  return json{{"token_id", t.token_id},
              {"session_id", t.session_id},
              {"prompt", to_key(t.prompt)},
              {"declared_size", t.declared_size},
              {"content_type", t.content_type},
              {"format", std::string(container_name(t.format))},
              {"created_at", timestamp_json(t.created_at)},
              {"expires_at", timestamp_json(t.expires_at)}};
}

ContainerFormat format_from_name(std::string_view name) {
  for (auto f : {ContainerFormat::Wav, ContainerFormat::WebM, ContainerFormat::Ogg, ContainerFormat::Mp4})
    if (container_name(f) == name) return f;
  return ContainerFormat::Unknown;
}

UploadToken token_from_json(const json& j) {
  UploadToken t;
  t.token_id = j.at("token_id").get<std::string>();
  t.session_id = j.at("session_id").get<std::string>();
  auto p = prompt_part_from_key(j.at("prompt").get<std::string>());
  if (!p) fail(ErrorCode::CorruptLog, "bad prompt in token " + t.token_id);
  t.prompt = *p;
  t.declared_size = j.at("declared_size").get<std::uint64_t>();
  t.content_type = j.at("content_type").get<std::string>();
  t.format = format_from_name(j.at("format").get<std::string>());
  t.created_at = timestamp_from_json(j.at("created_at"));
  t.expires_at = timestamp_from_json(j.at("expires_at"));
  return t;
}

// Complete "start end" lines only; a torn final line is a chunk that never became durable.
std::vector<ByteRange> read_ranges(const fs::path& path) {
  std::vector<ByteRange> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (true) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;
    std::istringstream line(content.substr(pos, nl - pos));
    ByteRange r;
    if (line >> r.start >> r.end) out.push_back(r);
    pos = nl + 1;
  }
  return normalize_ranges(std::move(out));
}

struct Fd {
  int fd = -1;
  explicit Fd(int f) : fd(f) {}
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
};

void pwrite_all(int fd, const std::uint8_t* data, std::size_t n, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < n) {
    const auto w = ::pwrite(fd, data + done, n - done, static_cast<off_t>(offset + done));
    if (w < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::IoFailure, std::strerror(errno));
    }
    done += static_cast<std::size_t>(w);
  }
}

void pread_all(int fd, std::uint8_t* data, std::size_t n, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < n) {
    const auto r = ::pread(fd, data + done, n - done, static_cast<off_t>(offset + done));
    if (r < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::IoFailure, std::strerror(errno));
    }
    if (r == 0) fail(ErrorCode::IoFailure, "short read");
    done += static_cast<std::size_t>(r);
  }
}

void append_line(const fs::path& path, const std::string& line) {
  Fd f(::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644));
  if (f.fd < 0) fail(ErrorCode::IoFailure, path.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < line.size()) {
    const auto w = ::write(f.fd, line.data() + done, line.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::IoFailure, std::strerror(errno));
    }
    done += static_cast<std::size_t>(w);
  }
  ::fsync(f.fd);
}

}  // namespace

UploadManager::UploadManager(fs::path root, BlobStore& blobs, Clock clock, UploadLimits limits,
                             AudioDecoder decoder, QualityConfig quality)
    : root_(std::move(root)),
      blobs_(blobs),
      clock_(std::move(clock)),
      limits_(limits),
      decoder_(std::move(decoder)),
      quality_(quality) {
  fs::create_directories(root_);
  load_all();
}

void UploadManager::load_all() {
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory()) continue;
    const auto meta = entry.path() / "token.json";
    if (!fs::exists(meta)) continue;  // begin crashed before the token became durable
    try {
      std::ifstream in(meta);
      auto slot = std::make_shared<Slot>();
      slot->token = token_from_json(json::parse(in));
      slot->token.received_ranges = read_ranges(entry.path() / "ranges.log");
      if (auto s = load_sample(slot->token.token_id)) slot->token.sample_id = s->sample_id;
      const auto key = key_of(slot->token.session_id, slot->token.prompt);
      auto it = by_key_.find(key);
      if (it == by_key_.end() || slots_.at(it->second)->token.created_at < slot->token.created_at)
        by_key_[key] = slot->token.token_id;
      slots_[slot->token.token_id] = std::move(slot);
    } catch (const std::exception& e) {
      spdlog::warn("skipping unreadable upload {}: {}", entry.path().string(), e.what());
    }
  }
}

std::optional<AudioSample> UploadManager::load_sample(const std::string& token_id) const {
  const auto path = dir(token_id) / "sample.json";
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path);
  return json::parse(in).get<AudioSample>();
}

std::shared_ptr<UploadManager::Slot> UploadManager::slot(const std::string& token_id) const {
  std::lock_guard lock(mu_);
  auto it = slots_.find(token_id);
  if (it == slots_.end()) fail(ErrorCode::UnknownToken, token_id);
  return it->second;
}

UploadToken UploadManager::begin(const std::string& session_id, Cohort cohort, PromptId prompt, int part,
                                 std::uint64_t declared_size, const std::string& content_type) {
  const auto& spec = prompt_spec(prompt);
  if (!spec.applies_to(cohort))
    fail(ErrorCode::CohortViolation, std::string(enum_name(prompt)) + " is not collected from " +
                                         std::string(enum_name(cohort)) + " sessions");
  spec.part(part);
  if (declared_size > limits_.max_bytes)
    fail(ErrorCode::PayloadTooLarge, std::to_string(declared_size) + " > " + std::to_string(limits_.max_bytes));
  if (declared_size == 0) fail(ErrorCode::BadRequest, "declared_size must be positive");
  const auto format = container_for_content_type(content_type);
  if (!format) fail(ErrorCode::UnsupportedFormat, content_type);

  const PromptPart pp{prompt, part};
  const auto key = key_of(session_id, pp);
  const Timestamp now = clock_();

  std::lock_guard lock(mu_);
  if (auto it = by_key_.find(key); it != by_key_.end()) {
    auto s = slots_.at(it->second);
    std::lock_guard slot_lock(s->mu);
    if (s->token.sample_id && s->token.declared_size != declared_size)
      fail(ErrorCode::DuplicatePart, to_key(pp) + " already finalized with different audio");
    if (s->token.sample_id || now < s->token.expires_at) return s->token;
  }

  UploadToken t;
  t.token_id = "upl_" + random_hex(24);
  t.session_id = session_id;
  t.prompt = pp;
  t.declared_size = declared_size;
  t.content_type = content_type;
  t.format = *format;
  t.created_at = now;
  t.expires_at = now + std::chrono::duration_cast<std::chrono::milliseconds>(limits_.token_ttl);

  fs::create_directories(dir(t.token_id));
  write_file_atomic(dir(t.token_id) / "token.json", token_json(t).dump());
  auto s = std::make_shared<Slot>();
  s->token = t;
  slots_[t.token_id] = s;
  by_key_[key] = t.token_id;
  return t;
}

ChunkAck UploadManager::append(const std::string& token_id, std::uint64_t offset,
                               std::span<const std::uint8_t> bytes) {
  auto s = slot(token_id);
  std::lock_guard lock(s->mu);
  auto& t = s->token;
  if (offset + bytes.size() > t.declared_size)
    fail(ErrorCode::RangeOutOfBounds, "[" + std::to_string(offset) + "," + std::to_string(offset + bytes.size()) +
                                          ") exceeds declared size " + std::to_string(t.declared_size));
  if (!t.sample_id && clock_() >= t.expires_at) fail(ErrorCode::TokenExpired, token_id);

  const ByteRange incoming{offset, offset + bytes.size()};
  const fs::path part = dir(token_id) / "data.part";
  // After finalize the data file is gone; the original blob holds the same bytes.
  fs::path held = part;
  if (t.sample_id) held = blobs_.path_for(load_sample(token_id)->source_checksum, "orig");

  // Bytes already held must match what is being re-sent.
  {
    Fd f(::open(held.c_str(), O_RDONLY));
    for (const auto& r : t.received_ranges) {
      const auto lo = std::max(r.start, incoming.start);
      const auto hi = std::min(r.end, incoming.end);
      if (lo >= hi) continue;
      if (f.fd < 0) fail(ErrorCode::IoFailure, "missing upload data for " + token_id);
      std::vector<std::uint8_t> existing(hi - lo);
      pread_all(f.fd, existing.data(), existing.size(), lo);
      if (!std::equal(existing.begin(), existing.end(), bytes.begin() + static_cast<std::ptrdiff_t>(lo - offset)))
        fail(t.sample_id ? ErrorCode::DuplicatePart : ErrorCode::RangeConflict, "[" + std::to_string(lo) + "," + std::to_string(hi) + ") differs from held bytes");
    }
  }

  auto merged = normalize_ranges([&] {
    auto v = t.received_ranges;
    v.push_back(incoming);
    return v;
  }());
  if (!t.sample_id && total_bytes(merged) != t.received_bytes()) {
    {
      Fd f(::open(part.c_str(), O_WRONLY | O_CREAT, 0644));
      if (f.fd < 0) fail(ErrorCode::IoFailure, part.string() + ": " + std::strerror(errno));
      pwrite_all(f.fd, bytes.data(), bytes.size(), offset);
      ::fdatasync(f.fd);
    }
    append_line(dir(token_id) / "ranges.log",
                std::to_string(incoming.start) + " " + std::to_string(incoming.end) + "\n");
    t.received_ranges = std::move(merged);
  }
  return ChunkAck{token_id, t.received_bytes(), t.declared_size, t.received_bytes() == t.declared_size};
}

AudioSample UploadManager::finalize(const std::string& token_id, const std::string& checksum) {
  auto s = slot(token_id);
  std::lock_guard lock(s->mu);
  auto& t = s->token;
  std::string want = checksum;
  std::transform(want.begin(), want.end(), want.begin(), [](unsigned char c) { return std::tolower(c); });

  if (auto done = load_sample(token_id)) {
    if (done->source_checksum != want) fail(ErrorCode::ChecksumMismatch, token_id);
    return *done;
  }
  if (t.received_bytes() != t.declared_size)
    fail(ErrorCode::IncompleteUpload, std::to_string(t.received_bytes()) + " of " + std::to_string(t.declared_size) + " bytes");

  const auto original = read_file_bytes(dir(token_id) / "data.part");
  if (original.size() < t.declared_size) fail(ErrorCode::IncompleteUpload, token_id);
  const std::span<const std::uint8_t> body(original.data(), t.declared_size);
  const std::string got = sha256_hex(body);
  if (got != want) fail(ErrorCode::ChecksumMismatch, "expected " + want + ", received " + got);

  ContainerFormat format = sniff_container(body);
  if (format == ContainerFormat::Unknown) format = t.format;
  PcmAudio audio = decoder_.decode(body, format);
  if (audio.sample_rate != kCanonicalSampleRate) audio = resample(audio, kCanonicalSampleRate);
  const auto pcm = to_canonical_pcm16(audio);
  const auto pcm_bytes = pcm16_le_bytes(pcm);
  const PcmAudio canonical = from_pcm16(pcm);

  AudioSample sample;
  sample.checksum = blobs_.put(pcm_bytes, "pcm");
  sample.source_checksum = blobs_.put(body, "orig");
  sample.sample_id = "smp_" + sample.checksum.substr(0, 24);
  sample.prompt = t.prompt;
  sample.sample_rate = kCanonicalSampleRate;
  sample.sample_count = static_cast<std::int64_t>(pcm.size());
  sample.duration_s = canonical.duration_s();
  sample.source_format = std::string(container_name(format));
  sample.received_at = clock_();
  sample.quality = quality_gate(canonical, t.prompt, quality_);

  write_file_atomic(dir(token_id) / "sample.json", json(sample).dump());
  t.sample_id = sample.sample_id;
  std::error_code ec;
  fs::remove(dir(token_id) / "data.part", ec);
  return sample;
}

std::optional<UploadToken> UploadManager::token(const std::string& token_id) const {
  std::shared_ptr<Slot> s;
  {
    std::lock_guard lock(mu_);
    auto it = slots_.find(token_id);
    if (it == slots_.end()) return std::nullopt;
    s = it->second;
  }
  std::lock_guard lock(s->mu);
  return s->token;
}

std::vector<UploadToken> UploadManager::tokens() const {
  std::vector<std::shared_ptr<Slot>> all;
  {
    std::lock_guard lock(mu_);
    for (const auto& [_, s] : slots_) all.push_back(s);
  }
  std::vector<UploadToken> out;
  for (const auto& s : all) {
    std::lock_guard lock(s->mu);
    out.push_back(s->token);
  }
  return out;
}

}  // namespace voice_ehr

#include "crash.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <random>
#include <thread>

#include "fixtures.hpp"
#include "voice_ehr/blob_store.hpp"
#include "voice_ehr/hash.hpp"
#include "voice_ehr/upload.hpp"

namespace voice_ehr::testing {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kChunk = 1024;
const PromptPart kPart{PromptId::HealthBaseline, 1};

bool covered(const UploadToken& t, std::uint64_t lo, std::uint64_t hi) {
  return std::any_of(t.received_ranges.begin(), t.received_ranges.end(),
                     [&](const ByteRange& r) { return r.start <= lo && hi <= r.end; });
}

// Sends every chunk not yet held, in a shuffled order, writing one byte to `progress`
// after each acknowledged chunk.
void send_missing(UploadManager& m, const UploadToken& t, const std::vector<std::uint8_t>& wav, std::uint64_t seed,
                  int progress) {
  std::vector<std::uint64_t> offsets;
  for (std::uint64_t off = 0; off < wav.size(); off += kChunk)
    if (!covered(t, off, std::min<std::uint64_t>(off + kChunk, wav.size()))) offsets.push_back(off);
  std::mt19937_64 rng(seed);
  std::shuffle(offsets.begin(), offsets.end(), rng);
  for (auto off : offsets) {
    const auto n = std::min<std::uint64_t>(kChunk, wav.size() - off);
    m.append(t.token_id, off, std::span(wav.data() + off, n));
    if (progress >= 0) {
      const char c = '.';
      (void)!::write(progress, &c, 1);
    }
  }
}

}  // namespace

CrashTrialOutcome upload_crash_trial(const fs::path& root, std::uint64_t seed, int kills) {
  CrashTrialOutcome out;
  const auto wav = encode_wav(fixture_clip(kPart, static_cast<int>(seed % 6)));
  const auto source_sha = sha256_hex(wav);
  const auto canonical = wav_checksum(wav);
  const auto uploads = root / "uploads";
  const auto blob_root = root / "blobs";
  std::mt19937_64 rng(seed);

  auto begin = [&](UploadManager& m) {
    return m.begin("ses_crash", Cohort::Patient, kPart.prompt, kPart.part, wav.size(), "audio/wav");
  };

  for (int round = 0; round < kills; ++round) {
    int fds[2];
    if (::pipe(fds) != 0) return {false, out.kills, "pipe failed"};
    const pid_t pid = ::fork();
    if (pid == 0) {
      ::close(fds[0]);
      int code = 0;
      try {
        BlobStore blobs(blob_root);
        UploadManager m(uploads, blobs);
        send_missing(m, begin(m), wav, seed * 1000 + static_cast<std::uint64_t>(round), fds[1]);
      } catch (...) {
        code = 3;
      }
      ::_exit(code);
    }
    ::close(fds[1]);
    // Let a random number of chunks land, then kill somewhere inside the next one.
    const int acks = std::uniform_int_distribution<int>(0, 6)(rng);
    bool exited = false;
    for (int i = 0; i < acks; ++i) {
      char c;
      if (::read(fds[0], &c, 1) != 1) {
        exited = true;
        break;
      }
    }
    if (!exited) std::this_thread::sleep_for(std::chrono::microseconds(std::uniform_int_distribution<int>(0, 1500)(rng)));
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    ::close(fds[0]);
    if (WIFEXITED(status) && WEXITSTATUS(status) != 0)
      return {false, out.kills, "child failed in round " + std::to_string(round)};
    if (WIFSIGNALED(status)) ++out.kills;

    // Whatever survived must reload and agree with the source bytes.
    try {
      BlobStore blobs(blob_root);
      UploadManager m(uploads, blobs);
      for (const auto& t : m.tokens()) {
        if (t.declared_size != wav.size()) return {false, out.kills, "token metadata changed"};
        if (t.received_ranges.empty()) continue;
        if (t.received_ranges.back().end > wav.size()) return {false, out.kills, "range beyond declared size"};
        const auto held = read_file_bytes(uploads / t.token_id / "data.part");
        for (const auto& r : t.received_ranges)
          if (held.size() < r.end || !std::equal(wav.begin() + static_cast<std::ptrdiff_t>(r.start),
                                                 wav.begin() + static_cast<std::ptrdiff_t>(r.end),
                                                 held.begin() + static_cast<std::ptrdiff_t>(r.start)))
            return {false, out.kills, "held bytes differ from source after round " + std::to_string(round)};
      }
    } catch (const std::exception& e) {
      return {false, out.kills, std::string("reload failed: ") + e.what()};
    }
  }

  try {
    BlobStore blobs(blob_root);
    UploadManager m(uploads, blobs);
    auto t = begin(m);
    send_missing(m, t, wav, seed, -1);
    const auto sample = m.finalize(t.token_id, source_sha);
    if (sample.source_checksum != source_sha) return {false, out.kills, "source checksum mismatch"};
    if (sample.checksum != canonical) return {false, out.kills, "canonical checksum mismatch"};
    if (!blobs.verify(sample.checksum, "pcm") || !blobs.verify(sample.source_checksum, "orig"))
      return {false, out.kills, "blob verification failed"};
  } catch (const std::exception& e) {
    return {false, out.kills, std::string("resume failed: ") + e.what()};
  }
  out.ok = true;
  return out;
}

}  // namespace voice_ehr::testing

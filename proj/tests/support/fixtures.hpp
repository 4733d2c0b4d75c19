#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voice_ehr/audio.hpp"
#include "voice_ehr/domain.hpp"
#include "voice_ehr/service.hpp"
#include "voice_ehr/timeutil.hpp"
#include "voice_ehr/transcription.hpp"

namespace voice_ehr::testing {

// ---- signals ----

PcmAudio sine(double freq_hz, double seconds, double amplitude, int rate = kCanonicalSampleRate,
              double phase = 0.0);
PcmAudio white_noise(double seconds, double amplitude, std::uint64_t seed, int rate = kCanonicalSampleRate);
PcmAudio silence(double seconds, int rate = kCanonicalSampleRate);
/// Glottal-like harmonic tone (f0 plus decaying harmonics), peak about `amplitude`.
PcmAudio voiced(double f0_hz, double seconds, double amplitude, int rate = kCanonicalSampleRate);
/// Noise whose amplitude swells once per breath (raised-cosine envelope at bpm/60 Hz),
/// plus independent white noise at `snr_db` below the breath power.
PcmAudio breathing(double bpm, double seconds, double snr_db, std::uint64_t seed,
                   int rate = kCanonicalSampleRate, double phase = 0.0);
/// `count` loud breath bursts of `burst_s` seconds spread over `seconds`, over a quiet bed.
PcmAudio breath_bursts(int count, double seconds, double burst_s, std::uint64_t seed,
                       int rate = kCanonicalSampleRate);
PcmAudio concat(std::initializer_list<PcmAudio> parts);
void add_noise(PcmAudio& audio, double amplitude, std::uint64_t seed);

/// SHA-256 of the canonical 16 kHz pcm16 bytes the ingest path will produce for `audio`
/// once it has been through a 16-bit WAV.
std::string canonical_checksum(const PcmAudio& audio);
std::string wav_checksum(const std::vector<std::uint8_t>& wav);

// ---- environment ----

struct TempDir {
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path path;
};

/// Deterministic time source shared by copies of the returned Clock.
class ManualClock {
 public:
  explicit ManualClock(Timestamp start = parse_rfc3339("2024-03-01T09:00:00Z"));
  Clock clock();
  void advance(std::chrono::milliseconds d);
  Timestamp now() const;

 private:
  struct State {
    mutable std::mutex mu;
    Timestamp t;
  };
  std::shared_ptr<State> state_;
};

// ---- participants ----

struct FixtureParticipant {
  std::string label;
  Cohort cohort = Cohort::Patient;
  std::string screening;
  std::map<int, nlohmann::json> pages;
  std::map<PromptPart, std::string> transcripts;
  bool nothing_else = false;
};

/// The six example participants (three patients, three controls).
const std::vector<FixtureParticipant>& participants();

/// Distinct, gate-passing audio for one participant and prompt part.
PcmAudio fixture_clip(PromptPart pp, int participant_index);

// ---- service driving ----

ApiResponse call(Service& svc, const std::string& method, const std::string& path,
                 const nlohmann::json& body = nlohmann::json::object(), const std::string& token = {},
                 std::map<std::string, std::string> headers = {});

/// Begin, chunk (in `chunk` byte pieces) and finalize one WAV upload; returns the
/// finalize response.
ApiResponse upload_wav(Service& svc, const std::string& session_id, const std::string& token, PromptPart pp,
                       const std::vector<std::uint8_t>& wav, std::size_t chunk = 64 * 1024);

struct DrivenSession {
  std::string session_id;
  std::string token;
  std::map<PromptPart, std::string> canonical_checksums;
  double audio_seconds = 0.0;
};

/// Walks a participant through every page over the API. Transcript texts are
/// registered with `asr` (when given) under the canonical checksum of each clip.
DrivenSession drive_session(Service& svc, const FixtureParticipant& p, int index, MockAsr* asr = nullptr);

}  // namespace voice_ehr::testing

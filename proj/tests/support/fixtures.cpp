#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "voice_ehr/codec.hpp"
#include "voice_ehr/hash.hpp"

#ifndef VOICE_EHR_FIXTURE_DIR
#error "VOICE_EHR_FIXTURE_DIR must be defined"
#endif

namespace voice_ehr::testing {

namespace fs = std::filesystem;
using std::numbers::pi;

PcmAudio sine(double freq_hz, double seconds, double amplitude, int rate, double phase) {
  PcmAudio a;
  a.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    a.samples[i] = static_cast<float>(amplitude * std::sin(2 * pi * freq_hz * i / rate + phase));
  return a;
}

PcmAudio white_noise(double seconds, double amplitude, std::uint64_t seed, int rate) {
  PcmAudio a;
  a.sample_rate = rate;
  a.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, amplitude);
  for (auto& s : a.samples) s = static_cast<float>(std::clamp(g(rng), -0.99, 0.99));
  return a;
}

PcmAudio silence(double seconds, int rate) {
  PcmAudio a;
  a.sample_rate = rate;
  a.samples.assign(static_cast<std::size_t>(std::llround(seconds * rate)), 0.0f);
  return a;
}

PcmAudio voiced(double f0_hz, double seconds, double amplitude, int rate) {
  PcmAudio a;
  a.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  a.samples.resize(n);
  const double norm = 1.0 + 0.5 + 0.25 + 0.125;
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0, w = 1.0;
    for (int h = 1; h <= 4; ++h, w *= 0.5) v += w * std::sin(2 * pi * h * f0_hz * i / rate);
    a.samples[i] = static_cast<float>(amplitude * v / norm);
  }
  return a;
}

PcmAudio breathing(double bpm, double seconds, double snr_db, std::uint64_t seed, int rate, double phase) {
  PcmAudio a;
  a.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  a.samples.resize(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const double f = bpm / 60.0;
  std::vector<double> breath(n);
  double power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double env = 0.5 - 0.5 * std::cos(2 * pi * f * t + phase);
    breath[i] = 0.2 * env * env * g(rng);
    power += breath[i] * breath[i];
  }
  power /= static_cast<double>(n);
  const double noise_sd = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  for (std::size_t i = 0; i < n; ++i)
    a.samples[i] = static_cast<float>(std::clamp(breath[i] + noise_sd * g(rng), -0.99, 0.99));
  return a;
}

PcmAudio breath_bursts(int count, double seconds, double burst_s, std::uint64_t seed, int rate) {
  PcmAudio a = white_noise(seconds, 0.002, seed, rate);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> g(0.0, 0.15);
  const double slot = seconds / count;
  for (int k = 0; k < count; ++k) {
    const double start = k * slot + (slot - burst_s) / 2;
    const auto i0 = static_cast<std::size_t>(start * rate);
    const auto len = static_cast<std::size_t>(burst_s * rate);
    for (std::size_t i = 0; i < len && i0 + i < a.samples.size(); ++i) {
      const double w = std::sin(pi * static_cast<double>(i) / static_cast<double>(len));
      a.samples[i0 + i] += static_cast<float>(w * g(rng));
    }
  }
  return a;
}

PcmAudio concat(std::initializer_list<PcmAudio> parts) {
  PcmAudio out;
  out.sample_rate = parts.size() ? parts.begin()->sample_rate : kCanonicalSampleRate;
  for (const auto& p : parts) {
    if (p.sample_rate != out.sample_rate) throw std::invalid_argument("concat: rate mismatch");
    out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
  }
  return out;
}

void add_noise(PcmAudio& audio, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, amplitude);
  for (auto& s : audio.samples) s = static_cast<float>(std::clamp(s + g(rng), -0.99, 0.99));
}

std::string wav_checksum(const std::vector<std::uint8_t>& wav) {
  const auto decoded = decode_wav(wav);
  const auto pcm = to_canonical_pcm16(resample(decoded, kCanonicalSampleRate));
  return sha256_hex(pcm16_le_bytes(pcm));
}

std::string canonical_checksum(const PcmAudio& audio) { return wav_checksum(encode_wav(audio)); }

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path = fs::temp_directory_path() /
         ("voice_ehr_test_" + random_hex(12) + "_" + std::to_string(counter.fetch_add(1)));
  fs::create_directories(path);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path, ec);
}

ManualClock::ManualClock(Timestamp start) : state_(std::make_shared<State>()) { state_->t = start; }

Clock ManualClock::clock() {
  auto s = state_;
  return [s] {
    std::lock_guard lk(s->mu);
    return s->t;
  };
}

void ManualClock::advance(std::chrono::milliseconds d) {
  std::lock_guard lk(state_->mu);
  state_->t += d;
}

Timestamp ManualClock::now() const {
  std::lock_guard lk(state_->mu);
  return state_->t;
}

const std::vector<FixtureParticipant>& participants() {
  static const std::vector<FixtureParticipant> all = [] {
    std::ifstream in(fs::path(VOICE_EHR_FIXTURE_DIR) / "participants.json");
    if (!in) throw std::runtime_error("participants.json not found");
    const auto j = nlohmann::json::parse(in);
    std::vector<FixtureParticipant> out;
    for (const auto& e : j) {
      FixtureParticipant p;
      p.label = e.at("label").get<std::string>();
      p.screening = e.at("screening").get<std::string>();
      p.cohort = cohort_from_screening(p.screening);
      for (const auto& [k, v] : e.at("pages").items()) p.pages[std::stoi(k)] = v;
      for (const auto& [k, v] : e.at("transcripts").items())
        p.transcripts[*prompt_part_from_key(k)] = v.get<std::string>();
      p.nothing_else = e.at("nothing_else").get<bool>();
      out.push_back(std::move(p));
    }
    return out;
  }();
  return all;
}

PcmAudio fixture_clip(PromptPart pp, int participant_index) {
  const auto seed = static_cast<std::uint64_t>(participant_index * 100 + static_cast<int>(pp.prompt) * 10 + pp.part);
  if (pp == PromptPart{PromptId::Breathing, 1}) return breathing(12.0 + participant_index, 21.0, 10.0, seed);
  if (pp == PromptPart{PromptId::Breathing, 2}) return breath_bursts(3, 8.0, 1.2, seed);
  if (pp == PromptPart{PromptId::Phonation, 1})
    return concat({silence(0.5), voiced(110.0 + 10 * participant_index, 3.0, 0.3), silence(0.5)});
  // Speech stand-in: a participant- and prompt-specific tone over light noise.
  PcmAudio a = voiced(120.0 + 7.0 * static_cast<int>(pp.prompt) + 13.0 * participant_index + pp.part, 4.0, 0.25);
  add_noise(a, 0.01, seed);
  return a;
}

ApiResponse call(Service& svc, const std::string& method, const std::string& path, const nlohmann::json& body,
                 const std::string& token, std::map<std::string, std::string> headers) {
  ApiRequest req;
  req.method = method;
  req.path = path;
  const auto q = path.find('?');
  if (q != std::string::npos) {
    req.path = path.substr(0, q);
    std::string rest = path.substr(q + 1);
    while (!rest.empty()) {
      const auto amp = rest.find('&');
      const std::string kv = rest.substr(0, amp);
      const auto eq = kv.find('=');
      req.query[kv.substr(0, eq)] = eq == std::string::npos ? "" : kv.substr(eq + 1);
      rest = amp == std::string::npos ? "" : rest.substr(amp + 1);
    }
  }
  req.headers = std::move(headers);
  if (!token.empty()) req.headers["authorization"] = "Bearer " + token;
  if (method != "GET" && method != "PUT") req.body = body.dump();
  return svc.handle(req);
}

ApiResponse upload_wav(Service& svc, const std::string& session_id, const std::string& token, PromptPart pp,
                       const std::vector<std::uint8_t>& wav, std::size_t chunk) {
  const std::string base = "/v1/sessions/" + session_id + "/audio/" + std::string(enum_name(pp.prompt)) + "/" +
                           std::to_string(pp.part);
  auto begin = call(svc, "POST", base + ":begin", {{"declared_size", wav.size()}, {"content_type", "audio/wav"}},
                    token);
  if (begin.status != 200) return begin;
  const std::string upl = begin.json()["upload_token"].get<std::string>();
  for (std::size_t off = 0; off < wav.size(); off += chunk) {
    const std::size_t end = std::min(wav.size(), off + chunk);
    ApiRequest req;
    req.method = "PUT";
    req.path = base + ":chunk";
    req.headers = {{"authorization", "Bearer " + token},
                   {"x-upload-token", upl},
                   {"content-range", "bytes " + std::to_string(off) + "-" + std::to_string(end - 1) + "/" +
                                         std::to_string(wav.size())}};
    req.body.assign(reinterpret_cast<const char*>(wav.data() + off), end - off);
    auto r = svc.handle(req);
    if (r.status != 200) return r;
  }
  return call(svc, "POST", base + ":finalize", {{"upload_token", upl}, {"checksum", sha256_hex(wav)}}, token);
}

namespace {

void expect_ok(const ApiResponse& r, const std::string& what) {
  if (r.status >= 300) throw std::runtime_error(what + " -> " + std::to_string(r.status) + " " + r.body);
}

}  // namespace

DrivenSession drive_session(Service& svc, const FixtureParticipant& p, int index, MockAsr* asr) {
  DrivenSession d;
  auto created = call(svc, "POST", "/v1/sessions", {{"cohort_screening_answer", p.screening}});
  expect_ok(created, p.label + " create");
  d.session_id = created.json()["session"]["session_id"].get<std::string>();
  d.token = created.json()["token"].get<std::string>();
  const std::string base = "/v1/sessions/" + d.session_id;
  std::string token = d.token;

  expect_ok(call(svc, "POST", base + "/consent", {{"granted", true}}, token), p.label + " consent");

  auto upload = [&](PromptPart pp) {
    const PcmAudio clip = fixture_clip(pp, index);
    const auto wav = encode_wav(clip);
    const std::string sum = wav_checksum(wav);
    d.canonical_checksums[pp] = sum;
    d.audio_seconds += clip.duration_s();
    if (asr) {
      auto it = p.transcripts.find(pp);
      if (it != p.transcripts.end()) asr->set_text(sum, it->second);
    }
    expect_ok(upload_wav(svc, d.session_id, token, pp, wav), p.label + " upload " + to_key(pp));
  };

  for (int page = 1; page <= kLastPage; ++page) {
    if (!page_required_for(p.cohort, page)) continue;
    const auto& spec = page_spec(page);
    if (page == 14) {
      auto pt = call(svc, "POST", base + "/provider-token", {}, token);
      expect_ok(pt, p.label + " provider token");
      token = pt.json()["token"].get<std::string>();
    }
    switch (spec.kind) {
      case PageKind::Survey:
      case PageKind::Provider:
        if (spec.prompt_id) {
          for (const auto& part : prompt_spec(*spec.prompt_id).parts) upload({*spec.prompt_id, part.part});
        } else {
          expect_ok(call(svc, "POST", base + "/pages/" + std::to_string(page) + "/answers", p.pages.at(page), token),
                    p.label + " page " + std::to_string(page));
        }
        break;
      case PageKind::Instruction:
        expect_ok(call(svc, "POST", base + "/pages/" + std::to_string(page) + "/advance", {}, token),
                  p.label + " advance " + std::to_string(page));
        break;
      case PageKind::AudioPrompt:
        if (*spec.prompt_id == PromptId::AdditionalInfo && p.nothing_else) {
          expect_ok(call(svc, "POST", base + "/pages/12/answers", {{"nothing_else_to_share", true}}, token),
                    p.label + " nothing else");
          break;
        }
        for (const auto& part : prompt_spec(*spec.prompt_id).parts) upload({*spec.prompt_id, part.part});
        break;
      case PageKind::Consent:
        break;
    }
  }
  return d;
}

}  // namespace voice_ehr::testing

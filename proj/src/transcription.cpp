#include "voice_ehr/transcription.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

#include <spdlog/spdlog.h>

#include "voice_ehr/error.hpp"

namespace voice_ehr {

TranscribePolicy should_transcribe(PromptId prompt, int part) {
  return prompt_spec(prompt).part(part).transcribe;
}

// ---------------------------------------------------------------------------
// Mock engine
// ---------------------------------------------------------------------------

MockAsr::MockAsr(std::map<std::string, std::string> texts, std::string engine_tag)
    : texts_(std::move(texts)), engine_tag_(std::move(engine_tag)) {}

void MockAsr::set_text(const std::string& checksum, std::string text) {
  std::lock_guard lock(mu_);
  texts_[checksum] = std::move(text);
}

void MockAsr::fail_on(const std::string& checksum, int times) {
  std::lock_guard lock(mu_);
  failures_[checksum] = times;
}

void MockAsr::set_unavailable(bool down) {
  std::lock_guard lock(mu_);
  down_ = down;
}

AsrCapabilities MockAsr::capabilities() {
  std::lock_guard lock(mu_);
  if (down_) fail(ErrorCode::AsrUnavailable, "mock engine down");
  return {engine_tag_, {"en"}, 600.0};
}

std::string MockAsr::transcribe(const AsrRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  ++calls_by_checksum_[request.checksum];
  if (down_) fail(ErrorCode::AsrUnavailable, "mock engine down");
  if (auto it = failures_.find(request.checksum); it != failures_.end() && it->second != 0) {
    if (it->second > 0) --it->second;
    fail(ErrorCode::AsrUnavailable, "injected failure for " + request.checksum);
  }
  auto it = texts_.find(request.checksum);
  return it == texts_.end() ? std::string{} : it->second;
}

int MockAsr::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

int MockAsr::calls_for(const std::string& checksum) const {
  std::lock_guard lock(mu_);
  auto it = calls_by_checksum_.find(checksum);
  return it == calls_by_checksum_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// Batch
// ---------------------------------------------------------------------------

TranscribeReport transcribe_session(SessionRecord& record, AsrClient& client, const AudioLoader& load,
                                    const TranscribeOptions& options, Clock clock) {
  AsrCapabilities caps;
  {
    auto delay = options.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        caps = client.capabilities();
        break;
      } catch (const std::exception& e) {
        if (attempt >= options.max_attempts) fail(ErrorCode::AsrUnavailable, e.what());
        if (options.sleep) options.sleep(delay); else std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
  }

  TranscribeReport report;
  std::vector<const AudioSample*> jobs;
  for (const auto& [pp, sample] : record.audio) {
    if (should_transcribe(pp.prompt, pp.part) == TranscribePolicy::Never) continue;
    auto existing = record.transcripts.find(pp);
    if (!options.force && existing != record.transcripts.end() && existing->second.asr_engine_tag == caps.engine_tag) {
      ++report.skipped_existing;
      continue;
    }
    jobs.push_back(&sample);
  }
  report.requested = static_cast<int>(jobs.size());

  std::mutex merge_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const AudioSample& sample = *jobs[i];
      std::string text;
      std::string error;
      auto delay = options.initial_backoff;
      for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
        try {
          const PcmAudio audio = load(sample);
          text = client.transcribe(AsrRequest{audio, sample.checksum, sample.prompt});
          error.clear();
          break;
        } catch (const std::exception& e) {
          error = e.what();
          if (attempt == options.max_attempts) break;
          if (options.sleep) options.sleep(delay); else std::this_thread::sleep_for(delay);
          delay *= 2;
        }
      }
      std::lock_guard lock(merge_mu);
      if (error.empty()) {
        record.transcripts[sample.prompt] = Transcript{sample.prompt, text, caps.engine_tag, clock()};
        record.transcription_failures.erase(sample.prompt);
        ++report.succeeded;
      } else {
        spdlog::warn("transcription failed for {} {}: {}", record.session_id, to_key(sample.prompt), error);
        record.transcription_failures[sample.prompt] = error;
        ++report.failed;
      }
    }
  };
  const int n_threads = std::clamp<int>(options.concurrency, 1, std::max<int>(1, report.requested));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (auto it = record.transcripts.find(PromptPart{PromptId::Phonation, 2}); it != record.transcripts.end()) {
    try {
      record.asr_quality_wer = rainbow_quality(record).wer;
    } catch (const Error&) {
      record.asr_quality_wer.reset();
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// WER
// ---------------------------------------------------------------------------

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

WerBreakdown word_error_rate(std::string_view reference, std::string_view hypothesis) {
  const auto ref = normalize_words(reference);
  const auto hyp = normalize_words(hypothesis);
  if (ref.empty()) fail(ErrorCode::EmptyReference);
  const std::size_t n = ref.size(), m = hyp.size();

  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1), d[i - 1][j] + 1, d[i][j - 1] + 1});

  WerBreakdown w;
  w.reference_words = static_cast<int>(n);
  w.hypothesis_words = static_cast<int>(m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++w.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++w.deletions;
      --i;
    } else {
      ++w.insertions;
      --j;
    }
  }
  w.wer = static_cast<double>(w.errors()) / static_cast<double>(n);
  return w;
}

WerBreakdown rainbow_quality(const SessionRecord& record) {
  auto it = record.transcripts.find(PromptPart{PromptId::Phonation, 2});
  if (it == record.transcripts.end()) fail(ErrorCode::MissingRecording, "no P4.2 transcript");
  return word_error_rate(kRainbowPassage, it->second.text);
}

}  // namespace voice_ehr

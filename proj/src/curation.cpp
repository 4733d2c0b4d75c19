#include "voice_ehr/curation.hpp"

#include <algorithm>
#include <cctype>

#include "voice_ehr/error.hpp"
#include "voice_ehr/protocol.hpp"
#include "voice_ehr/transcription.hpp"

namespace voice_ehr {

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

bool transcribable(const SessionRecord& r, PromptPart p, const AudioSample& sample) {
  if (sample.quality && !sample.quality->passes) return false;
  auto it = r.transcripts.find(p);
  return it != r.transcripts.end() && !blank(it->second.text);
}

}  // namespace

InclusionDecision curate(const SessionRecord& record, Timestamp decided_at) {
  if (!record.frozen) fail(ErrorCode::SessionNotFrozen, record.session_id);
  InclusionDecision d;
  d.decided_at = decided_at;

  if (record.audio.size() < 2) d.rules_fired.insert(ExclusionRule::FewerThanTwoRecordings);

  int speech = 0;
  int usable = 0;
  for (const auto& [p, sample] : record.audio) {
    if (should_transcribe(p.prompt, p.part) != TranscribePolicy::Always) continue;
    ++speech;
    if (transcribable(record, p, sample)) ++usable;
  }
  if (speech > 0 && usable == 0) d.rules_fired.insert(ExclusionRule::UntranscribableAudio);

  for (int page = 1; page <= 5; ++page) {
    if (!page_required_for(record.cohort, page)) continue;
    auto it = record.answers_by_page.find(page);
    if (it == record.answers_by_page.end() || it->second.is_null() || it->second.empty()) {
      d.rules_fired.insert(ExclusionRule::MissingPages1to5);
      break;
    }
  }
  d.included = d.rules_fired.empty();
  return d;
}

}  // namespace voice_ehr

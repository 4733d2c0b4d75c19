#include "walk.hpp"

#include <chrono>
#include <set>

#include "fixtures.hpp"
#include "voice_ehr/codec.hpp"
#include "voice_ehr/error.hpp"

namespace voice_ehr::testing {

namespace {

const FixtureParticipant& fixture_for(Cohort c) { return participants()[c == Cohort::Patient ? 0 : 3]; }

}  // namespace

nlohmann::json answers_for(Cohort c, int page) {
  const auto& p = fixture_for(c);
  if (auto it = p.pages.find(page); it != p.pages.end()) return it->second;
  if (auto it = participants()[0].pages.find(page); it != participants()[0].pages.end()) return it->second;
  return nlohmann::json::object();
}

Event audio_event(PromptPart pp, const std::string& id) {
  return Event{EventType::AttachAudio,
               prompt_spec(pp.prompt).app_page,
               {{"prompt", enum_name(pp.prompt)}, {"part", pp.part}, {"sample_id", id + to_key(pp)}},
               {}};
}

Event created_event(Cohort c, const std::string& id, Timestamp at) {
  return Event{EventType::Created, 0, {{"cohort", enum_name(c)}, {"session_id", id}, {"screening_answer", ""}}, at};
}

std::vector<Event> correct_next(const SessionState& s) {
  if (s.current_page == kPastEnd) return {};
  const auto& spec = page_spec(s.current_page);
  switch (spec.kind) {
    case PageKind::Consent:
      return {Event{EventType::Consent, 0, {{"granted", true}}, {}}};
    case PageKind::Instruction:
      return {Event{EventType::Advance, s.current_page, nlohmann::json::object(), {}}};
    case PageKind::Survey:
      return {Event{EventType::SubmitAnswers, s.current_page, answers_for(s.cohort, s.current_page), {}}};
    case PageKind::AudioPrompt:
    case PageKind::Provider:
      if (!spec.prompt_id)
        return {Event{EventType::SubmitAnswers, s.current_page, answers_for(s.cohort, s.current_page), {}}};
      for (const auto& part : prompt_spec(*spec.prompt_id).parts)
        if (!s.audio.contains({*spec.prompt_id, part.part})) return {audio_event({*spec.prompt_id, part.part})};
      return {};
  }
  return {};
}

Event random_event(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> type(0, 6), page(0, kLastPage), coin(0, 9);
  const auto parts = all_prompt_parts();
  std::uniform_int_distribution<std::size_t> part(0, parts.size() - 1);
  switch (type(rng)) {
    case 0:
      return Event{EventType::Consent, 0, {{"granted", coin(rng) > 1}}, {}};
    case 1: {
      const int p = page(rng);
      return Event{EventType::SubmitAnswers, p, answers_for(coin(rng) > 4 ? Cohort::Patient : Cohort::Control, p), {}};
    }
    case 2:
      return audio_event(parts[part(rng)]);
    case 3:
      return Event{EventType::Advance, page(rng), nlohmann::json::object(), {}};
    case 4:
      return Event{EventType::SubmitAnswers, 12, {{"nothing_else_to_share", true}}, {}};
    case 5:
      if (coin(rng) == 0) return Event{EventType::Abandon, 0, nlohmann::json::object(), {}};
      return Event{EventType::SubmitAnswers, page(rng), {{"junk", 1}}, {}};
    default:
      if (coin(rng) == 0) return Event{EventType::Freeze, 0, nlohmann::json::object(), {}};
      return Event{EventType::Consent, 0, {{"granted", true}}, {}};
  }
}

BranchingResult branching_property(std::uint64_t seed, int n) {
  BranchingResult out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 9), len(5, 80);
  const std::set<int> patient_only{4, 8, 14, 15, 16, 17};
  const Timestamp t0 = parse_rfc3339("2024-03-01T09:00:00Z");
  const auto started = std::chrono::steady_clock::now();
  auto violated = [&](const std::string& id, const std::string& what) {
    out.ok = false;
    out.failure = id + ": " + what;
    return out;
  };

  for (int i = 0; i < n; ++i) {
    const Cohort cohort = i % 2 ? Cohort::Control : Cohort::Patient;
    const std::string id = "ses_" + std::to_string(i);
    std::vector<Event> log{created_event(cohort, id, t0)};
    SessionState s = init_session(cohort, id, t0);
    const int steps = len(rng);
    for (int k = 0; k < steps; ++k) {
      const auto next = correct_next(s);
      Event e = (!next.empty() && coin(rng) < 7) ? next.front() : random_event(rng);
      e.at = t0 + std::chrono::seconds(k + 1);
      try {
        s = apply(s, e);
        log.push_back(e);
      } catch (const Error&) {
        // rejected events leave no trace
      }
    }
    ++out.sequences;

    if (cohort == Cohort::Control) {
      for (int p : patient_only)
        if (s.answers_by_page.contains(p) || s.is_completed(p))
          return violated(id, "control holds page " + std::to_string(p));
      if (s.audio.contains({PromptId::IllnessTrajectory, 1}) || s.audio.contains({PromptId::ProviderNote, 1}))
        return violated(id, "control holds patient-only audio");
    }
    const auto req = required_pages(cohort);
    std::vector<int> done(s.completed_pages.begin() + (s.is_completed(0) ? 1 : 0), s.completed_pages.end());
    if (done.size() > req.size() || !std::equal(done.begin(), done.end(), req.begin()))
      return violated(id, "completed pages are not a prefix of the flow");
    if (s.status == SessionStatus::Complete) {
      if (done != req) return violated(id, "complete without exactly the required pages");
      ++(cohort == Cohort::Patient ? out.completed_patients : out.completed_controls);
    }
    if (!s.consent_given && !s.answers_by_page.empty()) return violated(id, "answers without consent");
    if (replay(log) != s) return violated(id, "replay differs");
    if (s.event_count != log.size()) return violated(id, "event_count differs from log");
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace voice_ehr::testing

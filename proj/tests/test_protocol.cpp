#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "walk.hpp"
#include "voice_ehr/codec.hpp"
#include "voice_ehr/error.hpp"
#include "voice_ehr/protocol.hpp"

using namespace voice_ehr;
using namespace voice_ehr::testing;

namespace {

const Timestamp kT0 = parse_rfc3339("2024-03-01T09:00:00Z");

ErrorCode rejected(const SessionState& s, const Event& e) {
  try {
    apply(s, e);
  } catch (const Error& err) {
    return err.code();
  }
  ADD_FAILURE() << "event was accepted";
  return ErrorCode::BadRequest;
}

SessionState walk_to_end(Cohort c) {
  SessionState s = init_session(c, "ses_walk", kT0);
  for (int guard = 0; guard < 100 && s.current_page != kPastEnd; ++guard) {
    const auto next = correct_next(s);
    if (next.empty()) break;
    s = apply(s, next.front());
  }
  return s;
}

}  // namespace

// ---- page map ----

TEST(PageMap, PatientAndControlPageSets) {
  EXPECT_EQ(required_pages(Cohort::Patient).size(), 17u);
  EXPECT_EQ(required_pages(Cohort::Control),
            (std::vector<int>{1, 2, 3, 5, 6, 7, 9, 10, 11, 12, 13}));
  EXPECT_EQ(next_page(Cohort::Control, 3), 5);
  EXPECT_EQ(next_page(Cohort::Control, 7), 9);
  EXPECT_EQ(next_page(Cohort::Control, 13), std::nullopt);
  EXPECT_EQ(next_page(Cohort::Patient, 13), 14);
  EXPECT_EQ(page_spec(14).prompt_id, PromptId::ProviderNote);
}

TEST(PageMap, PromptsSitOnTheirPages) {
  for (const auto& p : default_prompt_catalog()) EXPECT_EQ(page_spec(p.app_page).prompt_id, p.prompt_id);
}

// ---- transitions ----

TEST(Transitions, NothingBeforeConsent) {
  const auto s = init_session(Cohort::Patient, "s", kT0);
  EXPECT_EQ(rejected(s, Event{EventType::SubmitAnswers, 1, answers_for(Cohort::Patient, 1), {}}),
            ErrorCode::ConsentRequired);
}

TEST(Transitions, DeclinedConsentAbandons) {
  const auto s = record_consent(init_session(Cohort::Patient, "s", kT0), false);
  EXPECT_EQ(s.status, SessionStatus::Abandoned);
  EXPECT_FALSE(s.consent_given);
  EXPECT_EQ(rejected(s, Event{EventType::Consent, 0, {{"granted", true}}, {}}), ErrorCode::ConsentAlreadyRecorded);
}

TEST(Transitions, ControlCannotTouchPatientPages) {
  auto s = record_consent(init_session(Cohort::Control, "s", kT0), true);
  for (int p : {1, 2, 3}) s = submit_answers(s, p, answers_for(Cohort::Control, p));
  EXPECT_EQ(s.current_page, 5);
  EXPECT_EQ(rejected(s, Event{EventType::SubmitAnswers, 4, answers_for(Cohort::Patient, 4), {}}),
            ErrorCode::CohortViolation);
  EXPECT_EQ(rejected(s, audio_event({PromptId::IllnessTrajectory, 1})), ErrorCode::CohortViolation);
  EXPECT_EQ(rejected(s, audio_event({PromptId::ProviderNote, 1})), ErrorCode::CohortViolation);
}

TEST(Transitions, OutOfOrderPageIsWrongPage) {
  auto s = record_consent(init_session(Cohort::Patient, "s", kT0), true);
  EXPECT_EQ(rejected(s, Event{EventType::SubmitAnswers, 2, answers_for(Cohort::Patient, 2), {}}), ErrorCode::WrongPage);
  EXPECT_EQ(rejected(s, audio_event({PromptId::HealthBaseline, 1})), ErrorCode::WrongPage);
}

TEST(Transitions, MissingRequiredFieldIsReported) {
  auto s = record_consent(init_session(Cohort::Patient, "s", kT0), true);
  EXPECT_EQ(rejected(s, Event{EventType::SubmitAnswers, 1, {{"age", 40}, {"sex", "Male"}}, {}}),
            ErrorCode::MissingField);
  EXPECT_EQ(rejected(s, Event{EventType::SubmitAnswers, 1, {{"age", "forty"}, {"sex", "Male"}, {"race", "White"}}, {}}),
            ErrorCode::InvalidField);
}

TEST(Transitions, InstructionPagesNeedAdvance) {
  auto s = record_consent(init_session(Cohort::Control, "s", kT0), true);
  for (int p : {1, 2, 3, 5}) s = submit_answers(s, p, answers_for(Cohort::Control, p));
  EXPECT_EQ(s.current_page, 6);
  EXPECT_EQ(next_page(s), 7);
  s = advance(s);
  EXPECT_EQ(s.current_page, 7);
  EXPECT_EQ(s.status, SessionStatus::AudioPrompts);
  EXPECT_EQ(s.pending_uploads, (std::set<PromptPart>{{PromptId::HealthBaseline, 1}}));
  EXPECT_THROW(next_page(s), Error);  // audio still pending
}

TEST(Transitions, MultiPartPromptCompletesOnLastPart) {
  auto s = walk_to_end(Cohort::Control);
  ASSERT_EQ(s.status, SessionStatus::Complete);
  auto t = record_consent(init_session(Cohort::Control, "s", kT0), true);
  while (t.current_page != 10) t = apply(t, correct_next(t).front());
  t = apply(t, audio_event({PromptId::Phonation, 2}));
  EXPECT_EQ(t.current_page, 10);
  EXPECT_EQ(rejected(t, audio_event({PromptId::Phonation, 2})), ErrorCode::DuplicatePart);
  t = apply(t, audio_event({PromptId::Phonation, 1}));
  EXPECT_EQ(t.current_page, 11);
}

TEST(Transitions, NothingElseDeclarationCompletesPage12) {
  auto s = record_consent(init_session(Cohort::Control, "s", kT0), true);
  while (s.current_page != 12) s = apply(s, correct_next(s).front());
  s = submit_answers(s, 12, {{"nothing_else_to_share", true}});
  EXPECT_EQ(s.current_page, 13);
  EXPECT_FALSE(s.audio.contains({PromptId::AdditionalInfo, 1}));
}

TEST(Transitions, FullWalksComplete) {
  for (auto c : {Cohort::Patient, Cohort::Control}) {
    const auto s = walk_to_end(c);
    EXPECT_EQ(s.status, SessionStatus::Complete);
    EXPECT_EQ(s.completed_pages.front(), 0);
    EXPECT_EQ(std::vector<int>(s.completed_pages.begin() + 1, s.completed_pages.end()), required_pages(c));
    EXPECT_TRUE(is_complete(s).complete);
  }
}

TEST(Transitions, FrozenRejectsEverything) {
  auto s = freeze(walk_to_end(Cohort::Control));
  EXPECT_EQ(rejected(s, Event{EventType::Freeze, 0, nlohmann::json::object(), {}}), ErrorCode::SessionFrozen);
  EXPECT_EQ(rejected(s, Event{EventType::Advance, 13, nlohmann::json::object(), {}}), ErrorCode::SessionFrozen);
}

TEST(Transitions, IdleSessionsAreAbandoned) {
  auto s = record_consent(init_session(Cohort::Patient, "s", kT0), true, kT0);
  EXPECT_EQ(abandon_if_idle(s, kT0 + std::chrono::hours(23)), s);
  const auto a = abandon_if_idle(s, kT0 + std::chrono::hours(25));
  EXPECT_EQ(a.status, SessionStatus::Abandoned);
  EXPECT_EQ(rejected(a, Event{EventType::SubmitAnswers, 1, answers_for(Cohort::Patient, 1), {}}),
            ErrorCode::SessionAbandoned);
}

TEST(Transitions, ApplyIsPure) {
  const auto s = record_consent(init_session(Cohort::Patient, "s", kT0), true);
  const auto copy = s;
  (void)submit_answers(s, 1, answers_for(Cohort::Patient, 1));
  try {
    apply(s, Event{EventType::SubmitAnswers, 9, {}, {}});
  } catch (const Error&) {
  }
  EXPECT_EQ(s, copy);
}

// ---- randomized properties ----

TEST(ProtocolProperty, RandomSequencesRespectCohortBranching) {
  const auto r = branching_property(20240301, 1200);
  EXPECT_TRUE(r.ok) << r.failure;
  EXPECT_EQ(r.sequences, 1200);
  EXPECT_GT(r.completed_patients, 50);
  EXPECT_GT(r.completed_controls, 50);
  EXPECT_LT(r.seconds, 10.0);
}

TEST(ProtocolProperty, ReplayRejectsLogWithoutCreated) {
  try {
    replay({Event{EventType::Consent, 0, {{"granted", true}}, kT0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CorruptLog);
  }
}

// ---- event log ----

class EventLogTest : public ::testing::Test {
 protected:
  TempDir dir;
  std::filesystem::path path() const { return dir.path / "events.jsonl"; }

  std::vector<Event> sample_events() const {
    return {created_event(Cohort::Control, "s", kT0), Event{EventType::Consent, 0, {{"granted", true}}, kT0 + std::chrono::seconds(1)},
            Event{EventType::SubmitAnswers, 1, answers_for(Cohort::Control, 1), kT0 + std::chrono::seconds(2)}};
  }
};

TEST_F(EventLogTest, AppendAndReadBack) {
  EventLog log(path());
  const auto ev = sample_events();
  for (std::size_t i = 0; i < ev.size(); ++i) log.append(ev[i], i + 1);
  EXPECT_EQ(log.read_all(), ev);
  EXPECT_EQ(replay(log.read_all()).current_page, 2);
}

TEST_F(EventLogTest, TornTailIsIgnoredAndRepaired) {
  EventLog log(path());
  const auto ev = sample_events();
  for (std::size_t i = 0; i < ev.size(); ++i) log.append(ev[i], i + 1);
  {
    std::ofstream out(path(), std::ios::app | std::ios::binary);
    const auto line = EventLog::encode_line(ev[1], 4);
    out << line.substr(0, line.size() / 2);
  }
  EXPECT_EQ(log.read_all(), ev);
  log.repair();
  log.append(ev[1], 4);
  EXPECT_EQ(log.read_all().size(), 4u);
}

TEST_F(EventLogTest, CorruptMiddleLineIsCorruptLog) {
  {
    std::ofstream out(path(), std::ios::binary);
    out << EventLog::encode_line(sample_events()[0], 1) << "\n{not json\n"
        << EventLog::encode_line(sample_events()[1], 3) << "\n";
  }
  try {
    EventLog(path()).read_all();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CorruptLog);
  }
}

TEST_F(EventLogTest, PayloadTamperingIsDetected) {
  auto line = EventLog::encode_line(sample_events()[2], 1);
  const auto at = line.find("Female");
  ASSERT_NE(at, std::string::npos);
  line.replace(at, 6, "Male  ");
  {
    std::ofstream out(path(), std::ios::binary);
    out << line << "\n" << EventLog::encode_line(sample_events()[0], 2) << "\n";
  }
  EXPECT_THROW(EventLog(path()).read_all(), Error);
}

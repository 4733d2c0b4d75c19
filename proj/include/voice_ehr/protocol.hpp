#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voice_ehr/domain.hpp"
#include "voice_ehr/timeutil.hpp"

namespace voice_ehr {

enum class PageKind { Consent, Survey, Instruction, AudioPrompt, Provider };
enum class SessionStatus { Consenting, Survey, AudioPrompts, ProviderSection, Complete, Abandoned };
enum class EventType { Created, Consent, SubmitAnswers, AttachAudio, Advance, Abandon, Freeze };

VOICE_EHR_ENUM_TABLE(PageKind, {PageKind::Consent, "Consent"}, {PageKind::Survey, "Survey"},
                     {PageKind::Instruction, "Instruction"},
                     {PageKind::AudioPrompt, "AudioPrompt"}, {PageKind::Provider, "Provider"});
VOICE_EHR_ENUM_TABLE(SessionStatus, {SessionStatus::Consenting, "Consenting"},
                     {SessionStatus::Survey, "Survey"},
                     {SessionStatus::AudioPrompts, "AudioPrompts"},
                     {SessionStatus::ProviderSection, "ProviderSection"},
                     {SessionStatus::Complete, "Complete"},
                     {SessionStatus::Abandoned, "Abandoned"});
VOICE_EHR_ENUM_TABLE(EventType, {EventType::Created, "created"}, {EventType::Consent, "consent"},
                     {EventType::SubmitAnswers, "submit_answers"},
                     {EventType::AttachAudio, "attach_audio"}, {EventType::Advance, "advance"},
                     {EventType::Abandon, "abandon"}, {EventType::Freeze, "freeze"});

inline constexpr int kConsentPage = 0;
inline constexpr int kLastPage = 17;
/// current_page once every required page is done.
inline constexpr int kPastEnd = kLastPage + 1;
inline constexpr std::chrono::hours kIdleLimit{24};

struct PageSpec {
  int page = 0;
  PageKind kind = PageKind::Consent;
  std::optional<PromptId> prompt_id;
  std::vector<std::string> required_fields;
  std::string title;
};

/// Fixed page map: 0 consent, 1–5 survey, 6 and 13 instruction, 7–12 audio prompts,
/// 14–17 provider section.
const PageSpec& page_spec(int page);

/// Pages 4, 8 and 14–17 are patient-only.
bool page_required_for(Cohort cohort, int page);
std::vector<int> required_pages(Cohort cohort);

/// Smallest page after `page` the cohort must complete; nullopt means Complete.
std::optional<int> next_page(Cohort cohort, int page);

struct SessionState {
  std::string session_id;
  Cohort cohort = Cohort::Patient;
  std::string screening_answer;
  int current_page = kConsentPage;
  std::vector<int> completed_pages;
  std::set<PromptPart> pending_uploads;
  SessionStatus status = SessionStatus::Consenting;
  bool consent_given = false;
  std::optional<Timestamp> consent_at;
  std::map<int, nlohmann::json> answers_by_page;
  std::map<PromptPart, std::string> audio;  // prompt part -> sample_id
  bool frozen = false;
  Timestamp created_at{};
  Timestamp last_event_at{};
  std::uint64_t event_count = 0;

  bool operator==(const SessionState&) const = default;
  bool is_completed(int page) const;
};

struct Event {
  EventType type = EventType::Created;
  int page = 0;
  nlohmann::json payload = nlohmann::json::object();
  Timestamp at{};

  bool operator==(const Event&) const = default;
};

/// Pure transition. Throws Error for every rejected event; the input is never modified.
SessionState apply(const SessionState& state, const Event& event);

/// Folds a full event log (first event must be Created).
SessionState replay(const std::vector<Event>& events);

SessionState init_session(Cohort cohort, std::string session_id, Timestamp at,
                          std::string screening_answer = {});
/// Random session id.
SessionState init_session(Cohort cohort);
std::string new_session_id();

/// "yes"/"no" screening answer -> cohort. Unrecognised answers are BadRequest.
Cohort cohort_from_screening(std::string_view answer);

SessionState record_consent(const SessionState& s, bool granted, Timestamp at = {});
SessionState submit_answers(const SessionState& s, int page, const nlohmann::json& answers,
                            Timestamp at = {});
SessionState attach_audio(const SessionState& s, PromptId prompt, int part,
                          const std::string& sample_id, Timestamp at = {});
/// Completes the current Instruction page.
SessionState advance(const SessionState& s, Timestamp at = {});
SessionState freeze(const SessionState& s, Timestamp at = {});
/// Moves sessions idle longer than kIdleLimit to Abandoned; otherwise returns s unchanged.
SessionState abandon_if_idle(const SessionState& s, Timestamp now);

/// Whether the current page's own requirements are met (Instruction pages always are).
bool page_requirements_met(const SessionState& s);
/// next_page for a live session; PageIncomplete if the current page is unfinished.
std::optional<int> next_page(const SessionState& s);

struct CompletionReport {
  bool complete = false;
  std::vector<int> missing_pages;
  std::vector<PromptPart> missing_parts;
};
CompletionReport is_complete(const SessionState& s);

/// Field-level check of one page's answers.
ValidationResult validate_page_answers(int page, const nlohmann::json& answers, Cohort cohort);

/// Record view of an engine state (no transcripts/metrics yet).
SessionRecord to_record(const SessionState& s);

void to_json(nlohmann::json& j, const PageSpec& p);
void to_json(nlohmann::json& j, const SessionState& s);
void from_json(const nlohmann::json& j, SessionState& s);
void to_json(nlohmann::json& j, const Event& e);
void from_json(const nlohmann::json& j, Event& e);

/// Append-only JSON-lines event log, one event per line:
/// {"seq", "type", "page", "payload", "payload_hash", "timestamp"}.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  /// Appends and fsyncs one line.
  void append(const Event& event, std::uint64_t seq);

  /// Reads every complete line. A torn final line (crash mid-write) is ignored; a
  /// malformed line elsewhere or a payload hash mismatch is CorruptLog.
  std::vector<Event> read_all() const;

  /// Drops a torn final line so later appends start on a line boundary.
  void repair();

  static std::string encode_line(const Event& event, std::uint64_t seq);

 private:
  std::filesystem::path path_;
};

}  // namespace voice_ehr

#include "voice_ehr/protocol.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include "voice_ehr/codec.hpp"
#include "voice_ehr/error.hpp"
#include "voice_ehr/hash.hpp"

namespace voice_ehr {

// ---------------------------------------------------------------------------
// Page map
// ---------------------------------------------------------------------------

namespace {

std::array<PageSpec, kLastPage + 1> build_pages() {
  std::array<PageSpec, kLastPage + 1> p;
  p[0] = {0, PageKind::Consent, std::nullopt, {"granted"}, "Informed consent"};
  p[1] = {1, PageKind::Survey, std::nullopt, {"age", "sex", "race"}, "About you"};
  p[2] = {2, PageKind::Survey, std::nullopt, {"occupation", "insurance", "education"},
          "Background"};
  p[3] = {3, PageKind::Survey, std::nullopt, {"health_history"}, "Health history"};
  p[4] = {4, PageKind::Survey, std::nullopt,
          {"symptoms", "symptom_duration_days", "symptom_progression"}, "Current symptoms"};
  p[5] = {5, PageKind::Survey, std::nullopt, {"recording_location"}, "Recording location"};
  p[6] = {6, PageKind::Instruction, std::nullopt, {}, "Recording instructions"};
  p[7] = {7, PageKind::AudioPrompt, PromptId::HealthBaseline, {}, "Health baseline"};
  p[8] = {8, PageKind::AudioPrompt, PromptId::IllnessTrajectory, {}, "Illness trajectory"};
  p[9] = {9, PageKind::AudioPrompt, PromptId::VoiceBaseline, {}, "Voice baseline"};
  p[10] = {10, PageKind::AudioPrompt, PromptId::Phonation, {}, "Vowels and reading"};
  p[11] = {11, PageKind::AudioPrompt, PromptId::Breathing, {}, "Breathing"};
  p[12] = {12, PageKind::AudioPrompt, PromptId::AdditionalInfo, {}, "Additional information"};
  p[13] = {13, PageKind::Instruction, std::nullopt, {}, "Provider section instructions"};
  p[14] = {14, PageKind::Provider, PromptId::ProviderNote, {}, "Provider note"};
  p[15] = {15, PageKind::Provider, std::nullopt, {"exam_findings"}, "Physical exam"};
  p[16] = {16, PageKind::Provider, std::nullopt, {"diagnosis"}, "Diagnosis"};
  p[17] = {17, PageKind::Provider, std::nullopt, {"next_steps"}, "Next steps"};
  return p;
}

constexpr bool patient_only(int page) { return page == 4 || page == 8 || (page >= 14 && page <= 17); }

}  // namespace

const PageSpec& page_spec(int page) {
  static const auto pages = build_pages();
  if (page < 0 || page > kLastPage) fail(ErrorCode::NotFound, "no page " + std::to_string(page));
  return pages[static_cast<size_t>(page)];
}

bool page_required_for(Cohort cohort, int page) {
  if (page < 1 || page > kLastPage) return false;
  return cohort == Cohort::Patient || !patient_only(page);
}

std::vector<int> required_pages(Cohort cohort) {
  std::vector<int> out;
  for (int p = 1; p <= kLastPage; ++p)
    if (page_required_for(cohort, p)) out.push_back(p);
  return out;
}

std::optional<int> next_page(Cohort cohort, int page) {
  for (int p = std::max(page + 1, 1); p <= kLastPage; ++p)
    if (page_required_for(cohort, p)) return p;
  return std::nullopt;
}

bool SessionState::is_completed(int page) const {
  return std::binary_search(completed_pages.begin(), completed_pages.end(), page);
}

// ---------------------------------------------------------------------------
// Transitions
// ---------------------------------------------------------------------------

namespace {

bool is_nothing_else_declaration(int page, const nlohmann::json& answers) {
  return page == prompt_spec(PromptId::AdditionalInfo).app_page && answers.is_object() &&
         answers.size() == 1 && answers.contains("nothing_else_to_share") &&
         answers["nothing_else_to_share"] == true;
}

void refresh(SessionState& s) {
  s.pending_uploads.clear();
  if (s.status == SessionStatus::Abandoned) return;
  const int p = s.current_page;
  if (p == kPastEnd) {
    s.status = SessionStatus::Complete;
    return;
  }
  if (p == kConsentPage)
    s.status = SessionStatus::Consenting;
  else if (p <= 5)
    s.status = SessionStatus::Survey;
  else if (p <= 13)
    s.status = SessionStatus::AudioPrompts;
  else
    s.status = SessionStatus::ProviderSection;

  const auto& spec = page_spec(p);
  if (spec.prompt_id) {
    for (const auto& part : prompt_spec(*spec.prompt_id).parts) {
      const PromptPart pp{*spec.prompt_id, part.part};
      if (!s.audio.contains(pp)) s.pending_uploads.insert(pp);
    }
  }
}

void complete_current(SessionState& s) {
  s.completed_pages.push_back(s.current_page);
  s.current_page = next_page(s.cohort, s.current_page).value_or(kPastEnd);
}

void require_live(const SessionState& s) {
  if (s.frozen) fail(ErrorCode::SessionFrozen, s.session_id);
  if (s.status == SessionStatus::Abandoned) fail(ErrorCode::SessionAbandoned, s.session_id);
}

void require_consent(const SessionState& s) {
  if (!s.consent_given) fail(ErrorCode::ConsentRequired, s.session_id);
}

void on_consent(SessionState& s, const Event& e) {
  if (s.frozen) fail(ErrorCode::SessionFrozen, s.session_id);
  if (s.status != SessionStatus::Consenting)
    fail(ErrorCode::ConsentAlreadyRecorded, s.session_id);
  const auto it = e.payload.find("granted");
  if (it == e.payload.end() || !it->is_boolean()) fail(ErrorCode::MissingField, "granted");
  if (it->get<bool>()) {
    s.consent_given = true;
    s.consent_at = e.at;
    complete_current(s);
  } else {
    s.status = SessionStatus::Abandoned;
  }
}

void on_answers(SessionState& s, const Event& e) {
  require_live(s);
  require_consent(s);
  const int page = e.page;
  if (page < 1 || page > kLastPage) fail(ErrorCode::WrongPage, "no page " + std::to_string(page));
  if (!page_required_for(s.cohort, page))
    fail(ErrorCode::CohortViolation, "controls do not complete page " + std::to_string(page));
  if (page != s.current_page)
    fail(ErrorCode::WrongPage,
         "page " + std::to_string(page) + " while current is " + std::to_string(s.current_page));
  if (!e.payload.is_object()) fail(ErrorCode::BadRequest, "answers must be a JSON object");

  const auto& spec = page_spec(page);
  const bool declaration = is_nothing_else_declaration(page, e.payload);
  if (spec.kind != PageKind::Survey && !(spec.kind == PageKind::Provider && !spec.prompt_id) &&
      !declaration)
    fail(ErrorCode::WrongPage, "page " + std::to_string(page) + " does not take answers");

  for (const auto& f : spec.required_fields) {
    auto it = e.payload.find(f);
    if (it == e.payload.end() || it->is_null() || (it->is_string() && it->get<std::string>().empty()))
      fail(ErrorCode::MissingField, f);
  }
  if (spec.kind == PageKind::Survey) {
    const auto v = validate_page_answers(page, e.payload, s.cohort);
    if (!v.ok()) fail(ErrorCode::InvalidField, v.errors.front().field + ": " + v.errors.front().message);
  }
  s.answers_by_page[page] = e.payload;
  complete_current(s);
}

void on_audio(SessionState& s, const Event& e) {
  require_live(s);
  require_consent(s);
  const auto& p = e.payload;
  if (!p.contains("prompt") || !p.contains("part") || !p.contains("sample_id"))
    fail(ErrorCode::BadRequest, "attach_audio needs prompt, part, sample_id");
  const auto prompt = enum_from_name<PromptId>(p["prompt"].get<std::string>());
  if (!prompt) fail(ErrorCode::UnknownPrompt, p["prompt"].get<std::string>());
  const auto& spec = prompt_spec(*prompt);
  if (!spec.applies_to(s.cohort))
    fail(ErrorCode::CohortViolation,
         std::string(enum_name(*prompt)) + " is not collected from controls");
  const int part = p["part"].get<int>();
  spec.part(part);
  const PromptPart pp{*prompt, part};
  if (s.audio.contains(pp)) fail(ErrorCode::DuplicatePart, to_key(pp));
  if (spec.app_page != s.current_page)
    fail(ErrorCode::WrongPage, to_key(pp) + " belongs to page " + std::to_string(spec.app_page) +
                                   ", current is " + std::to_string(s.current_page));
  s.audio[pp] = p["sample_id"].get<std::string>();
  const bool all = std::all_of(spec.parts.begin(), spec.parts.end(), [&](const PartSpec& ps) {
    return s.audio.contains(PromptPart{*prompt, ps.part});
  });
  if (all) complete_current(s);
}

void on_advance(SessionState& s, const Event& e) {
  require_live(s);
  require_consent(s);
  if (e.page != s.current_page) fail(ErrorCode::WrongPage, std::to_string(e.page));
  if (s.current_page == kPastEnd || page_spec(s.current_page).kind != PageKind::Instruction)
    fail(ErrorCode::PageIncomplete, "page " + std::to_string(s.current_page) + " needs input");
  complete_current(s);
}

}  // namespace

SessionState apply(const SessionState& in, const Event& e) {
  SessionState s = in;
  switch (e.type) {
    case EventType::Created:
      fail(ErrorCode::BadRequest, "session already created");
    case EventType::Consent:
      on_consent(s, e);
      break;
    case EventType::SubmitAnswers:
      on_answers(s, e);
      break;
    case EventType::AttachAudio:
      on_audio(s, e);
      break;
    case EventType::Advance:
      on_advance(s, e);
      break;
    case EventType::Abandon:
      require_live(s);
      if (s.status == SessionStatus::Complete) fail(ErrorCode::BadRequest, "session complete");
      s.status = SessionStatus::Abandoned;
      break;
    case EventType::Freeze:
      if (s.frozen) fail(ErrorCode::SessionFrozen, s.session_id);
      s.frozen = true;
      break;
  }
  s.last_event_at = e.at;
  ++s.event_count;
  refresh(s);
  return s;
}

SessionState replay(const std::vector<Event>& events) {
  if (events.empty() || events.front().type != EventType::Created)
    fail(ErrorCode::CorruptLog, "event log must start with created");
  const auto& c = events.front();
  SessionState s = init_session(c.payload.at("cohort").get<Cohort>(),
                                c.payload.at("session_id").get<std::string>(), c.at,
                                c.payload.value("screening_answer", std::string()));
  for (size_t i = 1; i < events.size(); ++i) s = apply(s, events[i]);
  return s;
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}() ^
                                          static_cast<std::uint64_t>(now_utc().time_since_epoch().count())};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id = "ses_";
  for (int i = 0; i < 2; ++i) {
    auto v = rng();
    for (int k = 0; k < 12; ++k) {
      id.push_back(kHex[v & 0xF]);
      v >>= 4;
    }
  }
  return id;
}

SessionState init_session(Cohort cohort, std::string session_id, Timestamp at,
                          std::string screening_answer) {
  SessionState s;
  s.session_id = std::move(session_id);
  s.cohort = cohort;
  s.screening_answer = std::move(screening_answer);
  s.created_at = at;
  s.last_event_at = at;
  s.event_count = 1;
  refresh(s);
  return s;
}

SessionState init_session(Cohort cohort) { return init_session(cohort, new_session_id(), now_utc()); }

Cohort cohort_from_screening(std::string_view answer) {
  std::string a;
  for (char c : answer)
    if (!std::isspace(static_cast<unsigned char>(c)))
      a.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (a == "yes" || a == "y" || a == "true") return Cohort::Patient;
  if (a == "no" || a == "n" || a == "false") return Cohort::Control;
  fail(ErrorCode::BadRequest, "cohort_screening_answer must be yes or no");
}

SessionState record_consent(const SessionState& s, bool granted, Timestamp at) {
  return apply(s, Event{EventType::Consent, kConsentPage, {{"granted", granted}}, at});
}

SessionState submit_answers(const SessionState& s, int page, const nlohmann::json& answers,
                            Timestamp at) {
  return apply(s, Event{EventType::SubmitAnswers, page, answers, at});
}

SessionState attach_audio(const SessionState& s, PromptId prompt, int part,
                          const std::string& sample_id, Timestamp at) {
  return apply(s, Event{EventType::AttachAudio,
                        prompt_spec(prompt).app_page,
                        {{"prompt", enum_name(prompt)}, {"part", part}, {"sample_id", sample_id}},
                        at});
}

SessionState advance(const SessionState& s, Timestamp at) {
  return apply(s, Event{EventType::Advance, s.current_page, nlohmann::json::object(), at});
}

SessionState freeze(const SessionState& s, Timestamp at) {
  return apply(s, Event{EventType::Freeze, s.current_page, nlohmann::json::object(), at});
}

SessionState abandon_if_idle(const SessionState& s, Timestamp now) {
  if (s.frozen || s.status == SessionStatus::Complete || s.status == SessionStatus::Abandoned)
    return s;
  if (now - s.last_event_at <= kIdleLimit) return s;
  return apply(s, Event{EventType::Abandon, s.current_page, nlohmann::json::object(), now});
}

bool page_requirements_met(const SessionState& s) {
  if (s.current_page == kPastEnd) return true;
  const auto kind = page_spec(s.current_page).kind;
  if (kind == PageKind::Instruction) return true;
  if (kind == PageKind::Consent) return s.consent_given;
  return s.is_completed(s.current_page);
}

std::optional<int> next_page(const SessionState& s) {
  if (!page_requirements_met(s))
    fail(ErrorCode::PageIncomplete, "page " + std::to_string(s.current_page));
  if (s.current_page == kPastEnd) return std::nullopt;
  return next_page(s.cohort, s.current_page);
}

CompletionReport is_complete(const SessionState& s) {
  CompletionReport r;
  for (int p : required_pages(s.cohort)) {
    if (s.is_completed(p)) continue;
    r.missing_pages.push_back(p);
    if (const auto& spec = page_spec(p); spec.prompt_id) {
      for (const auto& part : prompt_spec(*spec.prompt_id).parts) {
        const PromptPart pp{*spec.prompt_id, part.part};
        if (!s.audio.contains(pp)) r.missing_parts.push_back(pp);
      }
    }
  }
  r.complete = r.missing_pages.empty();
  return r;
}

ValidationResult validate_page_answers(int page, const nlohmann::json& answers, Cohort cohort) {
  ValidationResult out;
  const auto& spec = page_spec(page);
  if (spec.kind != PageKind::Survey) return out;
  const auto [_, all] = profile_from_answers({{page, answers}}, cohort);
  // Only fields that live on this page; other pages are simply absent here.
  static const std::map<int, std::vector<std::string>> kPageFields{
      {1, {"age", "sex", "gender_identity", "race"}},
      {2, {"weight_lb", "occupation", "insurance", "education", "zip_code"}},
      {3, {"health_history"}},
      {4, {"symptoms", "symptom_duration_days", "symptom_progression"}},
      {5, {"recording_location"}},
  };
  const auto& fields = kPageFields.at(page);
  for (const auto& e : all.errors)
    if (std::find(fields.begin(), fields.end(), e.field) != fields.end()) out.errors.push_back(e);
  return out;
}

SessionRecord to_record(const SessionState& s) {
  SessionRecord r;
  r.session_id = s.session_id;
  r.cohort = s.cohort;
  r.screening_answer = s.screening_answer;
  r.consent_given = s.consent_given;
  r.consent_at = s.consent_at;
  r.answers_by_page = s.answers_by_page;
  for (const auto& [pp, id] : s.audio) {
    AudioSample a;
    a.sample_id = id;
    a.prompt = pp;
    r.audio.emplace(pp, a);
  }
  r.provider_note_present = s.audio.contains(PromptPart{PromptId::ProviderNote, 1});
  r.frozen = s.frozen;
  auto [profile, _] = profile_from_answers(s.answers_by_page, s.cohort);
  r.profile = profile;
  return r;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const PageSpec& p) {
  j = nlohmann::json{{"page", p.page},
                     {"kind", p.kind},
                     {"prompt_id", p.prompt_id ? nlohmann::json(*p.prompt_id) : nlohmann::json()},
                     {"required_fields", p.required_fields},
                     {"title", p.title}};
}

void to_json(nlohmann::json& j, const SessionState& s) {
  nlohmann::json answers = nlohmann::json::object();
  for (const auto& [page, a] : s.answers_by_page) answers[std::to_string(page)] = a;
  j = nlohmann::json{{"session_id", s.session_id},
                     {"cohort", s.cohort},
                     {"screening_answer", s.screening_answer},
                     {"current_page", s.current_page},
                     {"completed_pages", s.completed_pages},
                     {"pending_uploads", nlohmann::json::array()},
                     {"status", s.status},
                     {"consent_given", s.consent_given},
                     {"consent_at", s.consent_at ? timestamp_json(*s.consent_at) : nlohmann::json()},
                     {"answers_by_page", std::move(answers)},
                     {"audio", prompt_map_json(s.audio)},
                     {"frozen", s.frozen},
                     {"created_at", timestamp_json(s.created_at)},
                     {"last_event_at", timestamp_json(s.last_event_at)},
                     {"event_count", s.event_count}};
  for (const auto& pp : s.pending_uploads) j["pending_uploads"].push_back(to_key(pp));
}

void from_json(const nlohmann::json& j, SessionState& s) {
  s.session_id = j.at("session_id").get<std::string>();
  s.cohort = j.at("cohort").get<Cohort>();
  s.screening_answer = j.value("screening_answer", std::string());
  s.current_page = j.at("current_page").get<int>();
  s.completed_pages = j.at("completed_pages").get<std::vector<int>>();
  s.pending_uploads.clear();
  for (const auto& k : j.at("pending_uploads")) {
    auto pp = prompt_part_from_key(k.get<std::string>());
    if (!pp) fail(ErrorCode::BadRequest, "bad pending upload key");
    s.pending_uploads.insert(*pp);
  }
  s.status = j.at("status").get<SessionStatus>();
  s.consent_given = j.at("consent_given").get<bool>();
  s.consent_at.reset();
  if (!j.at("consent_at").is_null()) s.consent_at = timestamp_from_json(j.at("consent_at"));
  s.answers_by_page.clear();
  for (const auto& [k, v] : j.at("answers_by_page").items()) s.answers_by_page.emplace(std::stoi(k), v);
  s.audio = prompt_map_from_json<std::string>(j.at("audio"));
  s.frozen = j.at("frozen").get<bool>();
  s.created_at = timestamp_from_json(j.at("created_at"));
  s.last_event_at = timestamp_from_json(j.at("last_event_at"));
  s.event_count = j.at("event_count").get<std::uint64_t>();
}

void to_json(nlohmann::json& j, const Event& e) {
  j = nlohmann::json{{"type", e.type},
                     {"page", e.page},
                     {"payload", e.payload},
                     {"timestamp", timestamp_json(e.at)}};
}

void from_json(const nlohmann::json& j, Event& e) {
  e.type = j.at("type").get<EventType>();
  e.page = j.at("page").get<int>();
  e.payload = j.at("payload");
  e.at = timestamp_from_json(j.at("timestamp"));
}

// ---------------------------------------------------------------------------
// Event log
// ---------------------------------------------------------------------------

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {}

std::string EventLog::encode_line(const Event& event, std::uint64_t seq) {
  nlohmann::json j = event;
  j["seq"] = seq;
  j["payload_hash"] = sha256_hex(event.payload.dump());
  return j.dump() + "\n";
}

void EventLog::append(const Event& event, std::uint64_t seq) {
  const std::string line = encode_line(event, seq);
  std::filesystem::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) fail(ErrorCode::IoFailure, "open " + path_.string());
  size_t off = 0;
  while (off < line.size()) {
    const auto n = ::write(fd, line.data() + off, line.size() - off);
    if (n < 0) {
      ::close(fd);
      fail(ErrorCode::IoFailure, "write " + path_.string());
    }
    off += static_cast<size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

std::vector<Event> EventLog::read_all() const {
  std::vector<Event> out;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return out;
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  size_t start = 0;
  std::uint64_t expected_seq = 1;
  while (start < data.size()) {
    const size_t nl = data.find('\n', start);
    if (nl == std::string::npos) break;  // torn tail
    const std::string_view line(data.data() + start, nl - start);
    start = nl + 1;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCode::CorruptLog, path_.string() + " line " + std::to_string(expected_seq));
    }
    if (j.value("seq", std::uint64_t{0}) != expected_seq)
      fail(ErrorCode::CorruptLog, path_.string() + " sequence gap at " + std::to_string(expected_seq));
    Event e = j.get<Event>();
    if (sha256_hex(e.payload.dump()) != j.value("payload_hash", std::string()))
      fail(ErrorCode::CorruptLog, path_.string() + " payload hash mismatch at " + std::to_string(expected_seq));
    out.push_back(std::move(e));
    ++expected_seq;
  }
  return out;
}

void EventLog::repair() {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path_, ec);
  if (ec || size == 0) return;
  std::ifstream in(path_, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto last_nl = data.rfind('\n');
  const std::uintmax_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (keep != size) std::filesystem::resize_file(path_, keep);
}

}  // namespace voice_ehr

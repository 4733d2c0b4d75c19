#include "voice_ehr/session_store.hpp"

#include <fstream>

#include "voice_ehr/blob_store.hpp"
#include "voice_ehr/codec.hpp"
#include "voice_ehr/error.hpp"

namespace voice_ehr {

namespace fs = std::filesystem;

namespace {

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

}  // namespace

SessionStore::SessionStore(fs::path root, Clock clock) : root_(std::move(root)), clock_(std::move(clock)) {
  fs::create_directories(root_);
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& id) {
  if (!valid_id(id)) fail(ErrorCode::NotFound, id);
  std::lock_guard lock(mu_);
  auto& e = entries_[id];
  if (!e) e = std::make_shared<Entry>();
  return e;
}

SessionState SessionStore::load(const std::string& id, Entry& e) {
  if (e.state) return *e.state;
  EventLog log(dir(id) / "events.jsonl");
  if (!fs::exists(log.path())) fail(ErrorCode::NotFound, id);
  log.repair();
  e.state = replay(log.read_all());
  return *e.state;
}

SessionState SessionStore::create(Cohort cohort, const std::string& screening_answer) {
  const std::string id = new_session_id();
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  const Timestamp at = clock_();
  SessionState s = init_session(cohort, id, at, screening_answer);
  const Event created{EventType::Created,
                      kConsentPage,
                      {{"cohort", enum_name(cohort)}, {"session_id", id}, {"screening_answer", screening_answer}},
                      at};
  EventLog(dir(id) / "events.jsonl").append(created, s.event_count);
  e->state = s;
  return s;
}

SessionState SessionStore::get(const std::string& id) {
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  return load(id, *e);
}

bool SessionStore::exists(const std::string& id) {
  return valid_id(id) && fs::exists(dir(id) / "events.jsonl");
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> out;
  for (const auto& d : fs::directory_iterator(root_))
    if (d.is_directory() && fs::exists(d.path() / "events.jsonl")) out.push_back(d.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

SessionState SessionStore::mutate(const std::string& id, const std::function<Event(const SessionState&)>& make) {
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  const SessionState before = load(id, *e);
  Event ev = make(before);
  if (ev.at == Timestamp{}) ev.at = clock_();
  SessionState after = apply(before, ev);
  EventLog(dir(id) / "events.jsonl").append(ev, after.event_count);
  e->state = after;
  return after;
}

SessionState SessionStore::append(const std::string& id, Event event) {
  return mutate(id, [&](const SessionState&) { return event; });
}

std::vector<Event> SessionStore::events(const std::string& id) {
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  load(id, *e);
  return EventLog(dir(id) / "events.jsonl").read_all();
}

std::map<PromptPart, AudioSample> SessionStore::samples(const std::string& id) {
  std::map<PromptPart, AudioSample> out;
  for (const auto& ev : events(id)) {
    if (ev.type != EventType::AttachAudio || !ev.payload.contains("sample")) continue;
    auto s = ev.payload["sample"].get<AudioSample>();
    out[s.prompt] = s;
  }
  return out;
}

SessionRecord SessionStore::record(const std::string& id) {
  SessionRecord r = to_record(get(id));
  for (auto& [pp, sample] : samples(id)) r.audio[pp] = sample;

  const auto derived_path = dir(id) / "derived.json";
  if (fs::exists(derived_path)) {
    std::ifstream in(derived_path);
    const json d = json::parse(in);
    r.transcripts = prompt_map_from_json<Transcript>(d.value("transcripts", json()));
    r.transcription_failures = prompt_map_from_json<std::string>(d.value("transcription_failures", json()));
    r.metrics = prompt_map_from_json<AcousticMetrics>(d.value("metrics", json()));
    if (d.contains("asr_quality_wer") && !d["asr_quality_wer"].is_null())
      r.asr_quality_wer = d["asr_quality_wer"].get<double>();
    if (d.contains("inclusion") && !d["inclusion"].is_null()) r.inclusion = d["inclusion"].get<InclusionDecision>();
    for (const auto& [k, q] : d.value("quality", json::object()).items()) {
      auto pp = prompt_part_from_key(k);
      if (pp && r.audio.contains(*pp) && !q.is_null()) r.audio[*pp].quality = q.get<QualityReport>();
    }
  }
  return r;
}

void SessionStore::save_derived(const SessionRecord& r) {
  json quality = json::object();
  for (const auto& [pp, s] : r.audio)
    if (s.quality) quality[to_key(pp)] = *s.quality;
  const json d{{"transcripts", prompt_map_json(r.transcripts)},
               {"transcription_failures", prompt_map_json(r.transcription_failures)},
               {"metrics", prompt_map_json(r.metrics)},
               {"asr_quality_wer", r.asr_quality_wer ? json(*r.asr_quality_wer) : json(nullptr)},
               {"inclusion", r.inclusion ? json(*r.inclusion) : json(nullptr)},
               {"quality", quality}};
  write_file_atomic(dir(r.session_id) / "derived.json", d.dump());
}

void SessionStore::with_lock(const std::string& id, const std::function<void()>& fn) {
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  fn();
}

}  // namespace voice_ehr

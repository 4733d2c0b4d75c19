#include "voice_ehr/codec.hpp"

namespace voice_ehr {

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

const json& req(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::BadRequest, std::string("missing field ") + key);
  return *it;
}

}  // namespace

json timestamp_json(Timestamp t) { return format_rfc3339(t); }

Timestamp timestamp_from_json(const json& j) {
  if (!j.is_string()) fail(ErrorCode::BadRequest, "timestamp must be a string");
  return parse_rfc3339(j.get_ref<const std::string&>());
}

void to_json(json& j, const PromptPart& p) { j = json{{"prompt", p.prompt}, {"part", p.part}}; }

void from_json(const json& j, PromptPart& p) {
  p.prompt = req(j, "prompt").get<PromptId>();
  p.part = req(j, "part").get<int>();
}

void to_json(json& j, const PartSpec& p) {
  j = json{{"part", p.part},
           {"display_text", p.display_text},
           {"min_duration_s", p.min_duration_s},
           {"max_duration_s", p.max_duration_s},
           {"transcribe", p.transcribe}};
}

void from_json(const json& j, PartSpec& p) {
  p.part = req(j, "part").get<int>();
  p.display_text = req(j, "display_text").get<std::string>();
  p.min_duration_s = req(j, "min_duration_s").get<double>();
  p.max_duration_s = req(j, "max_duration_s").get<double>();
  p.transcribe = req(j, "transcribe").get<TranscribePolicy>();
}

void to_json(json& j, const PromptSpec& p) {
  j = json{{"prompt_id", p.prompt_id},
           {"title", p.title},
           {"display_text", p.display_text},
           {"purpose", p.purpose},
           {"completed_by", p.completed_by},
           {"app_page", p.app_page},
           {"parts", p.parts}};
}

void from_json(const json& j, PromptSpec& p) {
  p.prompt_id = req(j, "prompt_id").get<PromptId>();
  p.title = req(j, "title").get<std::string>();
  p.display_text = req(j, "display_text").get<std::string>();
  p.purpose = req(j, "purpose").get<std::string>();
  p.completed_by = req(j, "completed_by").get<std::set<Cohort>>();
  p.app_page = req(j, "app_page").get<int>();
  p.parts = req(j, "parts").get<std::vector<PartSpec>>();
}

void to_json(json& j, const Race& r) {
  j = json{{"category", r.category}, {"other_text", r.other_text}};
}

void from_json(const json& j, Race& r) {
  r.category = req(j, "category").get<RaceCategory>();
  r.other_text = j.value("other_text", std::string());
}

void to_json(json& j, const TaggedSet& t) { j = json{{"tags", t.tags}, {"free_text", t.free_text}}; }

void from_json(const json& j, TaggedSet& t) {
  t.tags = req(j, "tags").get<std::set<std::string>>();
  t.free_text = j.value("free_text", std::string());
}

void to_json(json& j, const ParticipantProfile& p) {
  j = json{{"age", p.age},
           {"weight_lb", opt(p.weight_lb)},
           {"sex", p.sex},
           {"gender_identity", opt(p.gender_identity)},
           {"race", p.race},
           {"occupation", p.occupation},
           {"insurance", p.insurance},
           {"education", p.education},
           {"recording_location", p.recording_location},
           {"zip_code", opt(p.zip_code)},
           {"health_history", p.health_history},
           {"symptoms", opt(p.symptoms)},
           {"symptom_duration_days", opt(p.symptom_duration_days)},
           {"symptom_progression", opt(p.symptom_progression)}};
}

void from_json(const json& j, ParticipantProfile& p) {
  p.age = req(j, "age").get<int>();
  p.weight_lb = get_opt<double>(j, "weight_lb");
  p.sex = req(j, "sex").get<Sex>();
  p.gender_identity = get_opt<std::string>(j, "gender_identity");
  p.race = req(j, "race").get<Race>();
  p.occupation = req(j, "occupation").get<std::string>();
  p.insurance = req(j, "insurance").get<Insurance>();
  p.education = req(j, "education").get<Education>();
  p.recording_location = req(j, "recording_location").get<RecordingLocation>();
  p.zip_code = get_opt<std::string>(j, "zip_code");
  p.health_history = req(j, "health_history").get<TaggedSet>();
  p.symptoms = get_opt<TaggedSet>(j, "symptoms");
  p.symptom_duration_days = get_opt<int>(j, "symptom_duration_days");
  p.symptom_progression = get_opt<Progression>(j, "symptom_progression");
}

void to_json(json& j, const FieldError& e) { j = json{{"field", e.field}, {"message", e.message}}; }

void to_json(json& j, const QualityReport& q) {
  j = json{{"duration_s", q.duration_s},
           {"rms_dbfs", q.rms_dbfs},
           {"clipping_fraction", q.clipping_fraction},
           {"leading_trailing_silence_s", q.leading_trailing_silence_s},
           {"passes", q.passes},
           {"reasons", q.reasons}};
}

void from_json(const json& j, QualityReport& q) {
  q.duration_s = req(j, "duration_s").get<double>();
  q.rms_dbfs = req(j, "rms_dbfs").get<double>();
  q.clipping_fraction = req(j, "clipping_fraction").get<double>();
  q.leading_trailing_silence_s = req(j, "leading_trailing_silence_s").get<double>();
  q.passes = req(j, "passes").get<bool>();
  q.reasons = req(j, "reasons").get<std::vector<QualityReason>>();
}

void to_json(json& j, const AudioSample& s) {
  j = json{{"sample_id", s.sample_id},
           {"prompt", s.prompt},
           {"sample_rate", s.sample_rate},
           {"sample_count", s.sample_count},
           {"duration_s", s.duration_s},
           {"checksum", s.checksum},
           {"source_checksum", s.source_checksum},
           {"source_format", s.source_format},
           {"received_at", timestamp_json(s.received_at)},
           {"quality", opt(s.quality)}};
}

void from_json(const json& j, AudioSample& s) {
  s.sample_id = req(j, "sample_id").get<std::string>();
  s.prompt = req(j, "prompt").get<PromptPart>();
  s.sample_rate = req(j, "sample_rate").get<int>();
  s.sample_count = req(j, "sample_count").get<std::int64_t>();
  s.duration_s = req(j, "duration_s").get<double>();
  s.checksum = req(j, "checksum").get<std::string>();
  s.source_checksum = j.value("source_checksum", std::string());
  s.source_format = req(j, "source_format").get<std::string>();
  s.received_at = timestamp_from_json(req(j, "received_at"));
  s.quality = get_opt<QualityReport>(j, "quality");
}

void to_json(json& j, const Transcript& t) {
  j = json{{"prompt", t.prompt},
           {"text", t.text},
           {"asr_engine_tag", t.asr_engine_tag},
           {"created_at", timestamp_json(t.created_at)}};
}

void from_json(const json& j, Transcript& t) {
  t.prompt = req(j, "prompt").get<PromptPart>();
  t.text = req(j, "text").get<std::string>();
  t.asr_engine_tag = req(j, "asr_engine_tag").get<std::string>();
  t.created_at = timestamp_from_json(req(j, "created_at"));
}

void to_json(json& j, const AcousticMetrics& m) {
  j = json{{"respiratory_rate_bpm", opt(m.respiratory_rate_bpm)},
           {"rr_confidence", m.rr_confidence},
           {"deep_breath_count", opt(m.deep_breath_count)},
           {"max_phonation_time_s", opt(m.max_phonation_time_s)},
           {"rms_dbfs", m.rms_dbfs},
           {"clipping_fraction", m.clipping_fraction}};
}

void from_json(const json& j, AcousticMetrics& m) {
  m.respiratory_rate_bpm = get_opt<double>(j, "respiratory_rate_bpm");
  m.rr_confidence = req(j, "rr_confidence").get<double>();
  m.deep_breath_count = get_opt<int>(j, "deep_breath_count");
  m.max_phonation_time_s = get_opt<double>(j, "max_phonation_time_s");
  m.rms_dbfs = req(j, "rms_dbfs").get<double>();
  m.clipping_fraction = req(j, "clipping_fraction").get<double>();
}

void to_json(json& j, const InclusionDecision& d) {
  j = json{{"included", d.included},
           {"rules_fired", d.rules_fired},
           {"decided_at", timestamp_json(d.decided_at)}};
}

void from_json(const json& j, InclusionDecision& d) {
  d.included = req(j, "included").get<bool>();
  d.rules_fired = req(j, "rules_fired").get<std::set<ExclusionRule>>();
  d.decided_at = timestamp_from_json(req(j, "decided_at"));
}

void to_json(json& j, const SessionRecord& r) {
  json answers = json::object();
  for (const auto& [page, a] : r.answers_by_page) answers[std::to_string(page)] = a;
  j = json{{"session_id", r.session_id},
           {"cohort", r.cohort},
           {"screening_answer", r.screening_answer},
           {"consent_given", r.consent_given},
           {"consent_at", r.consent_at ? timestamp_json(*r.consent_at) : json(nullptr)},
           {"profile", opt(r.profile)},
           {"answers_by_page", std::move(answers)},
           {"audio", prompt_map_json(r.audio)},
           {"transcripts", prompt_map_json(r.transcripts)},
           {"transcription_failures", prompt_map_json(r.transcription_failures)},
           {"metrics", prompt_map_json(r.metrics)},
           {"provider_note_present", r.provider_note_present},
           {"asr_quality_wer", opt(r.asr_quality_wer)},
           {"frozen", r.frozen},
           {"inclusion", opt(r.inclusion)}};
}

void from_json(const json& j, SessionRecord& r) {
  r.session_id = req(j, "session_id").get<std::string>();
  r.cohort = req(j, "cohort").get<Cohort>();
  r.screening_answer = j.value("screening_answer", std::string());
  r.consent_given = req(j, "consent_given").get<bool>();
  r.consent_at.reset();
  if (auto it = j.find("consent_at"); it != j.end() && !it->is_null())
    r.consent_at = timestamp_from_json(*it);
  r.profile = get_opt<ParticipantProfile>(j, "profile");
  r.answers_by_page.clear();
  if (auto it = j.find("answers_by_page"); it != j.end() && it->is_object())
    for (const auto& [k, v] : it->items()) r.answers_by_page.emplace(std::stoi(k), v);
  r.audio = prompt_map_from_json<AudioSample>(j.value("audio", json()));
  r.transcripts = prompt_map_from_json<Transcript>(j.value("transcripts", json()));
  r.transcription_failures =
      prompt_map_from_json<std::string>(j.value("transcription_failures", json()));
  r.metrics = prompt_map_from_json<AcousticMetrics>(j.value("metrics", json()));
  r.provider_note_present = j.value("provider_note_present", false);
  r.asr_quality_wer = get_opt<double>(j, "asr_quality_wer");
  r.frozen = j.value("frozen", false);
  r.inclusion = get_opt<InclusionDecision>(j, "inclusion");
}

}  // namespace voice_ehr

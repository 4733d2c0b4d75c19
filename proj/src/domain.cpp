#include "voice_ehr/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "voice_ehr/error.hpp"

namespace voice_ehr {

namespace {

std::string squash(std::string_view s) {
  std::string out;
  for (char c : s)
    if (std::isalnum(static_cast<unsigned char>(c)))
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string trim_collapse(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

template <class E>
struct AnswerAliases {
  static constexpr std::pair<std::string_view, E> entries[] = {{"", E{}}};
  static constexpr bool enabled = false;
};

template <>
struct AnswerAliases<RaceCategory> {
  static constexpr bool enabled = true;
  static constexpr std::pair<std::string_view, RaceCategory> entries[] = {
      {"black", RaceCategory::BlackAfricanAmerican},
      {"blackaa", RaceCategory::BlackAfricanAmerican},
      {"africanamerican", RaceCategory::BlackAfricanAmerican},
      {"blackorafricanamerican", RaceCategory::BlackAfricanAmerican},
      {"hispanic", RaceCategory::HispanicLatino},
      {"latino", RaceCategory::HispanicLatino},
      {"latina", RaceCategory::HispanicLatino},
      {"latinx", RaceCategory::HispanicLatino},
      {"americanindian", RaceCategory::AmericanIndianAlaskaNative},
      {"alaskanative", RaceCategory::AmericanIndianAlaskaNative},
      {"pacificislander", RaceCategory::NativeHawaiianPacificIslander},
      {"nativehawaiian", RaceCategory::NativeHawaiianPacificIslander},
      {"twoormoreraces", RaceCategory::Multiracial},
      {"prefernottosay", RaceCategory::NoResponse},
  };
};

template <>
struct AnswerAliases<RecordingLocation> {
  static constexpr bool enabled = true;
  static constexpr std::pair<std::string_view, RecordingLocation> entries[] = {
      {"hospital", RecordingLocation::HospitalClinic},
      {"clinic", RecordingLocation::HospitalClinic},
      {"hospitalorclinic", RecordingLocation::HospitalClinic},
  };
};

template <>
struct AnswerAliases<Progression> {
  static constexpr bool enabled = true;
  static constexpr std::pair<std::string_view, Progression> entries[] = {
      {"better", Progression::Improving},
      {"improved", Progression::Improving},
      {"worsening", Progression::Worse},
      {"same", Progression::NoChange},
  };
};

template <>
struct AnswerAliases<Education> {
  static constexpr bool enabled = true;
  static constexpr std::pair<std::string_view, Education> entries[] = {
      {"somehighschool", Education::LessThanHighSchool},
      {"bachelors", Education::College},
      {"graduatedegree", Education::Graduate},
      {"prefernottosay", Education::NoResponse},
  };
};

template <>
struct AnswerAliases<Sex> {
  static constexpr bool enabled = true;
  static constexpr std::pair<std::string_view, Sex> entries[] = {
      {"prefernottosay", Sex::NoResponse},
  };
};

template <>
struct AnswerAliases<Insurance> {
  static constexpr bool enabled = true;
  static constexpr std::pair<std::string_view, Insurance> entries[] = {
      {"uninsured", Insurance::None},
      {"prefernottosay", Insurance::NoResponse},
  };
};

}  // namespace

template <class E>
std::optional<E> parse_answer_enum(std::string_view text) {
  const std::string key = squash(text);
  if (key.empty()) return std::nullopt;
  for (const auto& [v, name] : EnumTable<E>::entries)
    if (squash(name) == key) return v;
  if constexpr (AnswerAliases<E>::enabled) {
    for (const auto& [alias, v] : AnswerAliases<E>::entries)
      if (alias == key) return v;
  }
  return std::nullopt;
}

template std::optional<Cohort> parse_answer_enum<Cohort>(std::string_view);
template std::optional<Sex> parse_answer_enum<Sex>(std::string_view);
template std::optional<Insurance> parse_answer_enum<Insurance>(std::string_view);
template std::optional<Education> parse_answer_enum<Education>(std::string_view);
template std::optional<RecordingLocation> parse_answer_enum<RecordingLocation>(std::string_view);
template std::optional<Progression> parse_answer_enum<Progression>(std::string_view);
template std::optional<RaceCategory> parse_answer_enum<RaceCategory>(std::string_view);
template std::optional<PromptId> parse_answer_enum<PromptId>(std::string_view);

// ---------------------------------------------------------------------------
// Prompt catalog
// ---------------------------------------------------------------------------

std::string to_key(PromptPart p) {
  return std::string(enum_name(p.prompt)) + "." + std::to_string(p.part);
}

std::optional<PromptPart> prompt_part_from_key(std::string_view key) {
  const auto dot = key.find('.');
  const auto id = enum_from_name<PromptId>(key.substr(0, dot));
  if (!id) return std::nullopt;
  int part = 1;
  if (dot != std::string_view::npos) {
    const auto rest = key.substr(dot + 1);
    if (rest.size() != 1 || rest[0] < '1' || rest[0] > '9') return std::nullopt;
    part = rest[0] - '0';
  }
  return PromptPart{*id, part};
}

const PartSpec& PromptSpec::part(int index) const {
  for (const auto& p : parts)
    if (p.part == index) return p;
  fail(ErrorCode::UnknownPrompt,
       std::string(enum_name(prompt_id)) + " has no part " + std::to_string(index));
}

namespace {

std::vector<PromptSpec> build_catalog() {
  const std::set<Cohort> both{Cohort::Patient, Cohort::Control};
  const std::set<Cohort> patients{Cohort::Patient};

  std::vector<PromptSpec> c;

  {
    PromptSpec p;
    p.prompt_id = PromptId::HealthBaseline;
    p.title = "Health baseline";
    p.display_text =
        "Please tell us background information about your health before your current illness, "
        "including: Chronic conditions (such as high blood pressure or diabetes), Recent "
        "illnesses (for example, COVID-19), Other physical health problems, Mental health "
        "problems, such as anxiety, Medications you currently take, Any recent changes to your "
        "medication which made you feel differently.";
    p.purpose =
        "Establishes a baseline to contextualize changes due to illness, either in sounds, speech "
        "patterns, or spoken words.";
    p.completed_by = both;
    p.app_page = 7;
    p.parts = {{1, p.display_text, 3.0, 180.0, TranscribePolicy::Always}};
    c.push_back(std::move(p));
  }
  {
    PromptSpec p;
    p.prompt_id = PromptId::IllnessTrajectory;
    p.title = "Illness trajectory";
    p.display_text =
        "In as much detail as possible, please tell us how your illness has developed from the "
        "time when you first noticed symptoms until now. Include any medications you took (like "
        "Tylenol) or steps you use to reduce your symptoms. Please use words/phrases like \"on "
        "the first day\", \"in the morning\", \"then\", \"after that\" and use descriptive words "
        "like \"mild\", \"severe\". No detail is too small. (3 min.)";
    p.purpose =
        "Captures the complaint of the patient by approximating a record of illness progression.";
    p.completed_by = patients;
    p.app_page = 8;
    p.parts = {{1, p.display_text, 3.0, 180.0, TranscribePolicy::Always}};
    c.push_back(std::move(p));
  }
  {
    PromptSpec p;
    p.prompt_id = PromptId::VoiceBaseline;
    p.title = "Voice baseline";
    p.display_text =
        "Please tell us if you or anyone else has noticed any recent changes in your voice (like "
        "hoarse, raspy, or lost voice) speech (like difficulty getting words out or slurring "
        "words), or breathing. If so, describe these changes. These should be changes that "
        "started around the same time as this illness episode, not any chronic long-term "
        "changes. (1 min.)";
    p.purpose =
        "Establishes an \xE2\x80\x9C" "audio\xE2\x80\x9D baseline to contextualize changes in "
        "voice/speech which may arise from lifestyle factors/past conditions or may be a "
        "biomarker of disease.";
    p.completed_by = both;
    p.app_page = 9;
    p.parts = {{1, p.display_text, 3.0, 60.0, TranscribePolicy::Always}};
    c.push_back(std::move(p));
  }
  {
    PromptSpec p;
    p.prompt_id = PromptId::Phonation;
    p.title = "Conventional acoustic data";
    const std::string vowels =
        "Say each of these vowels for as long as you can. aaaaa (as in made); eeeee (beet); "
        "ooooo (cool)";
    const std::string rainbow = "Read these sentences: \xE2\x80\x9C" + std::string(kRainbowPassage) +
                                "\xE2\x80\x9D";
    p.display_text = "Part 1: " + vowels + " Part 2: " + rainbow;
    p.purpose = "Conventional voice and respiratory data for analysis of sound changes.";
    p.completed_by = both;
    p.app_page = 10;
    p.parts = {{1, vowels, 3.0, 60.0, TranscribePolicy::Never},
               {2, rainbow, 3.0, 60.0, TranscribePolicy::RainbowCheckOnly}};
    c.push_back(std::move(p));
  }
  {
    PromptSpec p;
    p.prompt_id = PromptId::Breathing;
    p.title = "Conventional breathing data";
    const std::string nasal =
        "Hold the device near your nose and record yourself breathing normally for 30 seconds "
        "with your mouth closed.";
    const std::string deep =
        "Hold the device near your mouth and record yourself taking 3 deep breaths through your "
        "mouth.";
    p.display_text = "Part 1: " + nasal + " Part 2: " + deep;
    p.purpose =
        "Conventional respiratory data for analysis of breathing changes and determination of "
        "respiratory rate.";
    p.completed_by = both;
    p.app_page = 11;
    p.parts = {{1, nasal, 20.0, 30.0, TranscribePolicy::Never},
               {2, deep, 3.0, 60.0, TranscribePolicy::Never}};
    c.push_back(std::move(p));
  }
  {
    PromptSpec p;
    p.prompt_id = PromptId::AdditionalInfo;
    p.title = "Additional information";
    p.display_text =
        "Is there anything else you would like us to know about your health or circumstances "
        "that you feel we have missed? For example, you can tell us about: your employment, your "
        "lifestyle habits, and/or any challenges you have had with the healthcare system, "
        "including delays with receiving care or problems with quality of care that may have "
        "impacted your health.";
    p.purpose =
        "Captures specific circumstances related to health which the patient considers to be "
        "important.";
    p.completed_by = both;
    p.app_page = 12;
    p.parts = {{1, p.display_text, 3.0, 180.0, TranscribePolicy::Always}};
    c.push_back(std::move(p));
  }
  {
    PromptSpec p;
    p.prompt_id = PromptId::ProviderNote;
    p.title = "Diagnosis and treatment plan";
    p.display_text =
        "Your physician or other provider should briefly describe the physical exam (given to "
        "you by the physician), any available lab results, imaging studies, the diagnosis, and "
        "other next steps related to testing, treatment, or monitoring the illness. If the "
        "healthcare provider is not available or you are at home, you can record this "
        "information yourself.";
    p.purpose =
        "Audio approximation other types of multimodal data which may be key context for the "
        "patient data collected by the application.";
    p.completed_by = patients;
    p.app_page = 14;
    p.parts = {{1, p.display_text, 3.0, 120.0, TranscribePolicy::Always}};
    c.push_back(std::move(p));
  }
  return c;
}

}  // namespace

const std::vector<PromptSpec>& default_prompt_catalog() {
  static const std::vector<PromptSpec> catalog = build_catalog();
  return catalog;
}

const PromptSpec& prompt_spec(PromptId id) {
  const auto& c = default_prompt_catalog();
  const auto idx = static_cast<size_t>(id) - 1;
  if (idx >= c.size()) fail(ErrorCode::UnknownPrompt, std::to_string(static_cast<int>(id)));
  return c[idx];
}

std::vector<PromptPart> all_prompt_parts() {
  std::vector<PromptPart> out;
  for (const auto& spec : default_prompt_catalog())
    for (const auto& part : spec.parts) out.push_back({spec.prompt_id, part.part});
  return out;
}

// ---------------------------------------------------------------------------
// Vocabularies
// ---------------------------------------------------------------------------

const std::vector<std::string>& condition_vocabulary() {
  static const std::vector<std::string> v{
      "Acid reflux",   "Allergies",       "Asthma",           "Autoimmune",
      "COPD",          "Cancer",          "Cardiovascular disease", "Chronic pain",
      "Depression/Anxiety", "Diabetes",   "Hypertension",     "Kidney disease",
      "Multiple sclerosis", "Neurological disorder", "Obesity", "Sleep disorders",
      "Stroke",        "Thyroid",
  };
  return v;
}

const std::vector<std::string>& symptom_vocabulary() {
  static const std::vector<std::string> v{
      "Chest pain",  "Congestion",   "Cough",           "Fatigue",
      "Fever",       "Headache",     "Hoarseness",      "Loss of taste or smell",
      "Muscle aches", "Nausea",      "Productive cough", "Runny nose",
      "Shortness of breath", "Sore throat", "Wheezing",
  };
  return v;
}

namespace {

std::string canonical_tag(std::string_view label, const std::vector<std::string>& vocab,
                          std::initializer_list<std::pair<std::string_view, std::string_view>> aliases) {
  const std::string key = squash(label);
  for (const auto& v : vocab)
    if (squash(v) == key) return v;
  for (const auto& [alias, target] : aliases)
    if (alias == key) return std::string(target);
  return "other:" + trim_collapse(label);
}

}  // namespace

std::string canonical_condition_tag(std::string_view label) {
  return canonical_tag(label, condition_vocabulary(),
                       {{"thyroiddisease", "Thyroid"},
                        {"thyroiddisorders", "Thyroid"},
                        {"thyroiddisorder", "Thyroid"},
                        {"hypothyroid", "Thyroid"},
                        {"hyperthyroid", "Thyroid"},
                        {"ms", "Multiple sclerosis"},
                        {"depression", "Depression/Anxiety"},
                        {"anxiety", "Depression/Anxiety"},
                        {"pain", "Chronic pain"},
                        {"highbloodpressure", "Hypertension"},
                        {"heartdisease", "Cardiovascular disease"},
                        {"sleepdisorder", "Sleep disorders"},
                        {"autoimmunedisorder", "Autoimmune"},
                        {"autoimmunedisease", "Autoimmune"},
                        {"gerd", "Acid reflux"},
                        {"seasonalallergies", "Allergies"}});
}

std::string canonical_symptom_tag(std::string_view label) {
  return canonical_tag(label, symptom_vocabulary(),
                       {{"drycough", "Cough"},
                        {"stuffynose", "Congestion"},
                        {"nasalcongestion", "Congestion"},
                        {"hoarsevoice", "Hoarseness"},
                        {"musclepain", "Muscle aches"},
                        {"bodyaches", "Muscle aches"},
                        {"tiredness", "Fatigue"}});
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

bool ValidationResult::has_error_on(std::string_view field) const {
  return std::any_of(errors.begin(), errors.end(),
                     [&](const FieldError& e) { return e.field == field; });
}

namespace {

bool tags_well_formed(const TaggedSet& set, const std::vector<std::string>& vocab) {
  for (const auto& t : set.tags) {
    if (t.rfind("other:", 0) == 0) {
      if (t.size() == 6) return false;
      continue;
    }
    if (std::find(vocab.begin(), vocab.end(), t) == vocab.end()) return false;
  }
  return true;
}

}  // namespace

ValidationResult validate_profile(const ParticipantProfile& p, Cohort cohort) {
  ValidationResult r;
  auto err = [&](std::string field, std::string msg) { r.errors.push_back({std::move(field), std::move(msg)}); };

  if (p.age < 0) err("age", "age must be >= 0");
  if (p.weight_lb && !(std::isfinite(*p.weight_lb) && *p.weight_lb > 0.0))
    err("weight_lb", "weight must be a positive number of pounds");
  if (p.race.category == RaceCategory::Other && trim_collapse(p.race.other_text).empty())
    err("race", "race 'Other' requires free text");
  if (trim_collapse(p.occupation).empty()) err("occupation", "occupation required");
  if (p.zip_code) {
    const auto& z = *p.zip_code;
    if (z.size() != 5 || !std::all_of(z.begin(), z.end(), [](char c) { return c >= '0' && c <= '9'; }))
      err("zip_code", "zip_code must be 5 digits");
  }
  if (!tags_well_formed(p.health_history, condition_vocabulary()))
    err("health_history", "unknown health_history tag");

  if (cohort == Cohort::Patient) {
    if (!p.symptoms || (p.symptoms->tags.empty() && trim_collapse(p.symptoms->free_text).empty()))
      err("symptoms", "symptoms required");
    else if (!tags_well_formed(*p.symptoms, symptom_vocabulary()))
      err("symptoms", "unknown symptom tag");
    if (!p.symptom_duration_days)
      err("symptom_duration_days", "symptom_duration_days required");
    else if (*p.symptom_duration_days < 0)
      err("symptom_duration_days", "symptom_duration_days must be >= 0");
    if (!p.symptom_progression) err("symptom_progression", "symptom_progression required");
  } else {
    if (p.symptoms) err("symptoms", "symptoms must be N/A for controls");
    if (p.symptom_duration_days)
      err("symptom_duration_days", "symptom_duration_days must be N/A for controls");
    if (p.symptom_progression)
      err("symptom_progression", "symptom_progression must be N/A for controls");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Survey answers -> profile
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

const json* field(const std::map<int, json>& pages, int page, const char* name) {
  auto it = pages.find(page);
  if (it == pages.end() || !it->second.is_object()) return nullptr;
  auto f = it->second.find(name);
  if (f == it->second.end() || f->is_null()) return nullptr;
  return &*f;
}

template <class E>
std::optional<E> enum_field(const std::map<int, json>& pages, int page, const char* name,
                            ValidationResult& r) {
  const json* v = field(pages, page, name);
  if (!v) {
    r.errors.push_back({name, std::string(name) + " required"});
    return std::nullopt;
  }
  if (!v->is_string()) {
    r.errors.push_back({name, std::string(name) + " must be a string"});
    return std::nullopt;
  }
  auto e = parse_answer_enum<E>(v->get<std::string>());
  if (!e) r.errors.push_back({name, "unrecognised " + std::string(name) + ": " + v->get<std::string>()});
  return e;
}

std::optional<std::string> text_field(const std::map<int, json>& pages, int page, const char* name,
                                      bool required, ValidationResult& r) {
  const json* v = field(pages, page, name);
  if (!v) {
    if (required) r.errors.push_back({name, std::string(name) + " required"});
    return std::nullopt;
  }
  if (!v->is_string()) {
    r.errors.push_back({name, std::string(name) + " must be a string"});
    return std::nullopt;
  }
  return v->get<std::string>();
}

std::optional<long long> int_field(const std::map<int, json>& pages, int page, const char* name,
                                   bool required, ValidationResult& r) {
  const json* v = field(pages, page, name);
  if (!v) {
    if (required) r.errors.push_back({name, std::string(name) + " required"});
    return std::nullopt;
  }
  if (v->is_number_integer()) return v->get<long long>();
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (std::floor(d) == d) return static_cast<long long>(d);
  }
  r.errors.push_back({name, std::string(name) + " must be an integer"});
  return std::nullopt;
}

std::optional<TaggedSet> tag_field(const std::map<int, json>& pages, int page, const char* name,
                                   const char* notes, bool required,
                                   std::string (*canon)(std::string_view), ValidationResult& r) {
  const json* v = field(pages, page, name);
  if (!v) {
    if (required) r.errors.push_back({name, std::string(name) + " required"});
    return std::nullopt;
  }
  if (!v->is_array()) {
    r.errors.push_back({name, std::string(name) + " must be a list"});
    return std::nullopt;
  }
  TaggedSet set;
  for (const auto& item : *v) {
    if (!item.is_string()) {
      r.errors.push_back({name, std::string(name) + " entries must be strings"});
      return std::nullopt;
    }
    const auto s = item.get<std::string>();
    if (squash(s) == "none" || squash(s).empty()) continue;
    set.tags.insert(canon(s));
  }
  if (const json* n = field(pages, page, notes); n && n->is_string()) set.free_text = n->get<std::string>();
  return set;
}

}  // namespace

std::pair<std::optional<ParticipantProfile>, ValidationResult> profile_from_answers(
    const std::map<int, json>& pages, Cohort cohort) {
  ValidationResult r;
  ParticipantProfile p;

  if (auto age = int_field(pages, 1, "age", true, r)) p.age = static_cast<int>(*age);
  if (auto sex = enum_field<Sex>(pages, 1, "sex", r)) p.sex = *sex;
  p.gender_identity = text_field(pages, 1, "gender_identity", false, r);
  if (auto race = text_field(pages, 1, "race", true, r)) {
    if (auto cat = parse_answer_enum<RaceCategory>(*race))
      p.race = {*cat, *cat == RaceCategory::Other ? std::string(*race) : std::string()};
    else
      p.race = {RaceCategory::Other, trim_collapse(*race)};
  }
  if (auto race_other = text_field(pages, 1, "race_other", false, r);
      race_other && p.race.category == RaceCategory::Other)
    p.race.other_text = trim_collapse(*race_other);

  if (const json* w = field(pages, 2, "weight_lb")) {
    if (w->is_number())
      p.weight_lb = w->get<double>();
    else
      r.errors.push_back({"weight_lb", "weight_lb must be a number"});
  }
  if (auto occ = text_field(pages, 2, "occupation", true, r)) p.occupation = *occ;
  if (auto ins = enum_field<Insurance>(pages, 2, "insurance", r)) p.insurance = *ins;
  if (auto edu = enum_field<Education>(pages, 2, "education", r)) p.education = *edu;
  p.zip_code = text_field(pages, 2, "zip_code", false, r);

  if (auto hh = tag_field(pages, 3, "health_history", "health_history_notes", true,
                          &canonical_condition_tag, r))
    p.health_history = *hh;

  if (cohort == Cohort::Patient) {
    p.symptoms = tag_field(pages, 4, "symptoms", "symptoms_notes", true, &canonical_symptom_tag, r);
    if (auto d = int_field(pages, 4, "symptom_duration_days", true, r))
      p.symptom_duration_days = static_cast<int>(*d);
    p.symptom_progression = enum_field<Progression>(pages, 4, "symptom_progression", r);
  } else if (pages.contains(4)) {
    r.errors.push_back({"symptoms", "symptoms must be N/A for controls"});
  }

  if (auto loc = enum_field<RecordingLocation>(pages, 5, "recording_location", r))
    p.recording_location = *loc;

  if (!r.ok()) return {std::nullopt, r};
  auto v = validate_profile(p, cohort);
  if (!v.ok()) return {std::nullopt, v};
  return {p, v};
}

ValidationResult validate_record(const SessionRecord& rec) {
  ValidationResult r;
  auto err = [&](std::string f, std::string m) { r.errors.push_back({std::move(f), std::move(m)}); };

  if (!rec.consent_given && (!rec.answers_by_page.empty() || !rec.audio.empty()))
    err("consent_given", "answers or audio present without consent");

  if (rec.cohort == Cohort::Control) {
    for (int page : {4, 8, 14, 15, 16, 17})
      if (rec.answers_by_page.contains(page))
        err("answers_by_page", "control has answers for page " + std::to_string(page));
    for (const auto& [pp, _] : rec.audio)
      if (!prompt_spec(pp.prompt).applies_to(Cohort::Control))
        err("audio", "control has audio for " + to_key(pp));
  }

  if (rec.profile) {
    auto v = validate_profile(*rec.profile, rec.cohort);
    r.errors.insert(r.errors.end(), v.errors.begin(), v.errors.end());
  }

  for (const auto& [pp, s] : rec.audio) {
    if (s.prompt != pp) err("audio", "sample filed under wrong prompt " + to_key(pp));
    if (s.sample_rate <= 0) {
      err("audio", "non-positive sample rate");
      continue;
    }
    const double expected = static_cast<double>(s.sample_count) / s.sample_rate;
    if (std::abs(expected - s.duration_s) > 1.0 / s.sample_rate + 1e-9)
      err("audio", "duration disagrees with sample count for " + to_key(pp));
    if (s.quality && s.quality->passes != s.quality->reasons.empty())
      err("audio", "quality.passes inconsistent with reasons for " + to_key(pp));
  }

  for (const auto& [pp, t] : rec.transcripts) {
    if (prompt_spec(pp.prompt).part(pp.part).transcribe == TranscribePolicy::Never)
      err("transcripts", "transcript present for non-transcribed " + to_key(pp));
  }

  for (const auto& [pp, m] : rec.metrics) {
    if (m.respiratory_rate_bpm && (*m.respiratory_rate_bpm < 4.0 || *m.respiratory_rate_bpm > 60.0))
      err("metrics", "respiratory rate out of [4, 60] for " + to_key(pp));
    if (m.max_phonation_time_s) {
      auto a = rec.audio.find(pp);
      if (a != rec.audio.end() && *m.max_phonation_time_s > a->second.duration_s + 1e-9)
        err("metrics", "MPT exceeds recording duration for " + to_key(pp));
    }
  }

  if (rec.inclusion && rec.inclusion->included != rec.inclusion->rules_fired.empty())
    err("inclusion", "included must equal rules_fired.empty()");
  return r;
}

}  // namespace voice_ehr

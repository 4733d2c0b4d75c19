#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "voice_ehr/timeutil.hpp"

namespace voice_ehr {

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Cohort { Patient, Control };
enum class Sex { Male, Female, Other, NoResponse };
enum class Insurance { Private, Public, None, NoResponse };
enum class Education { LessThanHighSchool, HighSchool, College, Graduate, NoResponse };
enum class RecordingLocation { HospitalClinic, Home, Other };
enum class Progression { Worse, NoChange, Improving };
enum class RaceCategory {
  White,
  BlackAfricanAmerican,
  Asian,
  HispanicLatino,
  AmericanIndianAlaskaNative,
  NativeHawaiianPacificIslander,
  Multiracial,
  Other,
  NoResponse,
};

enum class PromptId {
  HealthBaseline = 1,
  IllnessTrajectory = 2,
  VoiceBaseline = 3,
  Phonation = 4,
  Breathing = 5,
  AdditionalInfo = 6,
  ProviderNote = 7,
};

enum class TranscribePolicy { Always, RainbowCheckOnly, Never };
enum class QualityReason { TooShort, TooLong, NearSilence, Clipping };
enum class ExclusionRule { FewerThanTwoRecordings, UntranscribableAudio, MissingPages1to5 };

/// Name table for an enum. Specialized below for every wire-visible enum.
template <class E>
struct EnumTable;

#define VOICE_EHR_ENUM_TABLE(E, ...)                                     \
  template <>                                                            \
  struct EnumTable<E> {                                                  \
    static constexpr std::pair<E, std::string_view> entries[] = {__VA_ARGS__}; \
  }

VOICE_EHR_ENUM_TABLE(Cohort, {Cohort::Patient, "Patient"}, {Cohort::Control, "Control"});
VOICE_EHR_ENUM_TABLE(Sex, {Sex::Male, "Male"}, {Sex::Female, "Female"}, {Sex::Other, "Other"},
                     {Sex::NoResponse, "NoResponse"});
VOICE_EHR_ENUM_TABLE(Insurance, {Insurance::Private, "Private"}, {Insurance::Public, "Public"},
                     {Insurance::None, "None"}, {Insurance::NoResponse, "NoResponse"});
VOICE_EHR_ENUM_TABLE(Education, {Education::LessThanHighSchool, "LessThanHighSchool"},
                     {Education::HighSchool, "HighSchool"}, {Education::College, "College"},
                     {Education::Graduate, "Graduate"}, {Education::NoResponse, "NoResponse"});
VOICE_EHR_ENUM_TABLE(RecordingLocation, {RecordingLocation::HospitalClinic, "HospitalClinic"},
                     {RecordingLocation::Home, "Home"}, {RecordingLocation::Other, "Other"});
VOICE_EHR_ENUM_TABLE(Progression, {Progression::Worse, "Worse"},
                     {Progression::NoChange, "NoChange"}, {Progression::Improving, "Improving"});
VOICE_EHR_ENUM_TABLE(RaceCategory, {RaceCategory::White, "White"},
                     {RaceCategory::BlackAfricanAmerican, "BlackAfricanAmerican"},
                     {RaceCategory::Asian, "Asian"}, {RaceCategory::HispanicLatino, "HispanicLatino"},
                     {RaceCategory::AmericanIndianAlaskaNative, "AmericanIndianAlaskaNative"},
                     {RaceCategory::NativeHawaiianPacificIslander, "NativeHawaiianPacificIslander"},
                     {RaceCategory::Multiracial, "Multiracial"}, {RaceCategory::Other, "Other"},
                     {RaceCategory::NoResponse, "NoResponse"});
VOICE_EHR_ENUM_TABLE(PromptId, {PromptId::HealthBaseline, "P1"},
                     {PromptId::IllnessTrajectory, "P2"}, {PromptId::VoiceBaseline, "P3"},
                     {PromptId::Phonation, "P4"}, {PromptId::Breathing, "P5"},
                     {PromptId::AdditionalInfo, "P6"}, {PromptId::ProviderNote, "P7"});
VOICE_EHR_ENUM_TABLE(TranscribePolicy, {TranscribePolicy::Always, "Always"},
                     {TranscribePolicy::RainbowCheckOnly, "RainbowCheckOnly"},
                     {TranscribePolicy::Never, "Never"});
VOICE_EHR_ENUM_TABLE(QualityReason, {QualityReason::TooShort, "TooShort"},
                     {QualityReason::TooLong, "TooLong"},
                     {QualityReason::NearSilence, "NearSilence"},
                     {QualityReason::Clipping, "Clipping"});
VOICE_EHR_ENUM_TABLE(ExclusionRule,
                     {ExclusionRule::FewerThanTwoRecordings, "FewerThanTwoRecordings"},
                     {ExclusionRule::UntranscribableAudio, "UntranscribableAudio"},
                     {ExclusionRule::MissingPages1to5, "MissingPages1to5"});

template <class E>
constexpr std::string_view enum_name(E value) {
  for (const auto& [v, name] : EnumTable<E>::entries)
    if (v == value) return name;
  return "?";
}

/// Exact match on the canonical name.
template <class E>
constexpr std::optional<E> enum_from_name(std::string_view name) {
  for (const auto& [v, n] : EnumTable<E>::entries)
    if (n == name) return v;
  return std::nullopt;
}

/// Lenient parse used for survey answers: case and punctuation are ignored and a few
/// spellings seen in exported survey data ("No Response", "Black/AA", "Hospital") are
/// accepted as aliases.
template <class E>
std::optional<E> parse_answer_enum(std::string_view text);

// ---------------------------------------------------------------------------
// Prompt protocol
// ---------------------------------------------------------------------------

struct PromptPart {
  PromptId prompt = PromptId::HealthBaseline;
  int part = 1;

  auto operator<=>(const PromptPart&) const = default;
};

/// "P4.2" style key used in JSON maps and log lines.
std::string to_key(PromptPart p);
std::optional<PromptPart> prompt_part_from_key(std::string_view key);

struct PartSpec {
  int part = 1;
  std::string display_text;
  double min_duration_s = 3.0;
  double max_duration_s = 180.0;
  TranscribePolicy transcribe = TranscribePolicy::Always;
};

struct PromptSpec {
  PromptId prompt_id = PromptId::HealthBaseline;
  std::string title;
  std::string display_text;
  std::string purpose;
  std::set<Cohort> completed_by;
  int app_page = 0;
  std::vector<PartSpec> parts;

  bool applies_to(Cohort cohort) const { return completed_by.contains(cohort); }
  /// Throws UnknownPrompt for a part index the prompt does not have.
  const PartSpec& part(int index) const;
  /// Cap of the first (or only) part; P5 reports the 30 s breathing cap.
  double max_duration_s() const { return parts.front().max_duration_s; }
};

/// The seven prompts of the collection protocol, in prompt order.
const std::vector<PromptSpec>& default_prompt_catalog();
const PromptSpec& prompt_spec(PromptId id);
std::vector<PromptPart> all_prompt_parts();

/// Three sentences read aloud in P4 part 2.
inline constexpr std::string_view kRainbowPassage =
    "When the sunlight strikes raindrops in the air, they act as a prism and form a rainbow. "
    "The rainbow is a division of white light into many beautiful colors. These take the "
    "shape of a long round arch, with its path high above, and its two ends apparently "
    "beyond the horizon.";

// ---------------------------------------------------------------------------
// Participant
// ---------------------------------------------------------------------------

struct Race {
  RaceCategory category = RaceCategory::NoResponse;
  std::string other_text;  // only meaningful for RaceCategory::Other

  bool operator==(const Race&) const = default;
};

/// Closed tag vocabulary plus free text. Unknown tags are kept as "other:<text>".
struct TaggedSet {
  std::set<std::string> tags;
  std::string free_text;

  bool operator==(const TaggedSet&) const = default;
};

struct ParticipantProfile {
  int age = 0;
  std::optional<double> weight_lb;
  Sex sex = Sex::NoResponse;
  std::optional<std::string> gender_identity;
  Race race;
  std::string occupation;
  Insurance insurance = Insurance::NoResponse;
  Education education = Education::NoResponse;
  RecordingLocation recording_location = RecordingLocation::Other;
  std::optional<std::string> zip_code;
  TaggedSet health_history;
  std::optional<TaggedSet> symptoms;
  std::optional<int> symptom_duration_days;
  std::optional<Progression> symptom_progression;

  bool operator==(const ParticipantProfile&) const = default;
};

struct FieldError {
  std::string field;
  std::string message;

  bool operator==(const FieldError&) const = default;
};

struct ValidationResult {
  std::vector<FieldError> errors;

  bool ok() const { return errors.empty(); }
  bool has_error_on(std::string_view field) const;
};

ValidationResult validate_profile(const ParticipantProfile& profile, Cohort cohort);

/// Health-condition vocabulary (seeded from the reported condition list).
const std::vector<std::string>& condition_vocabulary();
const std::vector<std::string>& symptom_vocabulary();
/// Maps a free-form condition/symptom label onto the vocabulary; unknown labels
/// become "other:<label>".
std::string canonical_condition_tag(std::string_view label);
std::string canonical_symptom_tag(std::string_view label);

// ---------------------------------------------------------------------------
// Audio, transcripts, metrics, curation
// ---------------------------------------------------------------------------

struct QualityReport {
  double duration_s = 0.0;
  double rms_dbfs = 0.0;
  double clipping_fraction = 0.0;
  double leading_trailing_silence_s = 0.0;
  bool passes = false;
  std::vector<QualityReason> reasons;

  bool operator==(const QualityReport&) const = default;
};

struct AudioSample {
  std::string sample_id;
  PromptPart prompt;
  int sample_rate = 16000;
  std::int64_t sample_count = 0;
  double duration_s = 0.0;
  std::string checksum;         // SHA-256 of canonical PCM bytes
  std::string source_checksum;  // SHA-256 of the uploaded container
  std::string source_format;    // wav | webm | ogg | mp4
  Timestamp received_at{};
  std::optional<QualityReport> quality;

  bool operator==(const AudioSample&) const = default;
};

struct Transcript {
  PromptPart prompt;
  std::string text;
  std::string asr_engine_tag;
  Timestamp created_at{};

  bool operator==(const Transcript&) const = default;
};

struct AcousticMetrics {
  std::optional<double> respiratory_rate_bpm;
  double rr_confidence = 0.0;
  std::optional<int> deep_breath_count;
  std::optional<double> max_phonation_time_s;
  double rms_dbfs = 0.0;
  double clipping_fraction = 0.0;

  bool operator==(const AcousticMetrics&) const = default;
};

struct InclusionDecision {
  bool included = false;
  std::set<ExclusionRule> rules_fired;
  Timestamp decided_at{};

  bool operator==(const InclusionDecision&) const = default;
};

/// One participant's full pass through the protocol.
struct SessionRecord {
  std::string session_id;
  Cohort cohort = Cohort::Patient;
  std::string screening_answer;
  bool consent_given = false;
  std::optional<Timestamp> consent_at;
  std::optional<ParticipantProfile> profile;
  std::map<int, nlohmann::json> answers_by_page;
  std::map<PromptPart, AudioSample> audio;
  std::map<PromptPart, Transcript> transcripts;
  std::map<PromptPart, std::string> transcription_failures;
  std::map<PromptPart, AcousticMetrics> metrics;
  bool provider_note_present = false;
  std::optional<double> asr_quality_wer;
  bool frozen = false;
  std::optional<InclusionDecision> inclusion;

  bool operator==(const SessionRecord&) const = default;
};

/// Parses survey pages 1–5 into a profile. Missing or malformed fields are reported
/// as FieldErrors rather than thrown.
std::pair<std::optional<ParticipantProfile>, ValidationResult> profile_from_answers(
    const std::map<int, nlohmann::json>& answers_by_page, Cohort cohort);

/// Single-pass check of every SessionRecord type invariant.
ValidationResult validate_record(const SessionRecord& record);

}  // namespace voice_ehr

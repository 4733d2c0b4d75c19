#pragma once

// Canonical JSON encoding of the domain types. Field names are stable and
// documented in docs/schema.md; timestamps are RFC 3339 UTC strings and absent
// optionals are encoded as null.

#include <nlohmann/json.hpp>

#include "voice_ehr/domain.hpp"
#include "voice_ehr/error.hpp"

namespace voice_ehr {

using nlohmann::json;

template <class E>
  requires requires { EnumTable<E>::entries; }
void to_json(json& j, E value) {
  j = std::string(enum_name(value));
}

template <class E>
  requires requires { EnumTable<E>::entries; }
void from_json(const json& j, E& value) {
  if (!j.is_string()) fail(ErrorCode::BadRequest, "expected enum string");
  auto v = enum_from_name<E>(j.get_ref<const std::string&>());
  if (!v) fail(ErrorCode::BadRequest, "unknown enum value: " + j.get<std::string>());
  value = *v;
}

void to_json(json& j, const PromptPart& p);
void from_json(const json& j, PromptPart& p);
void to_json(json& j, const PartSpec& p);
void to_json(json& j, const PromptSpec& p);
void from_json(const json& j, PromptSpec& p);
void from_json(const json& j, PartSpec& p);
void to_json(json& j, const Race& r);
void from_json(const json& j, Race& r);
void to_json(json& j, const TaggedSet& t);
void from_json(const json& j, TaggedSet& t);
void to_json(json& j, const ParticipantProfile& p);
void from_json(const json& j, ParticipantProfile& p);
void to_json(json& j, const FieldError& e);
void to_json(json& j, const QualityReport& q);
void from_json(const json& j, QualityReport& q);
void to_json(json& j, const AudioSample& s);
void from_json(const json& j, AudioSample& s);
void to_json(json& j, const Transcript& t);
void from_json(const json& j, Transcript& t);
void to_json(json& j, const AcousticMetrics& m);
void from_json(const json& j, AcousticMetrics& m);
void to_json(json& j, const InclusionDecision& d);
void from_json(const json& j, InclusionDecision& d);
void to_json(json& j, const SessionRecord& r);
void from_json(const json& j, SessionRecord& r);

json timestamp_json(Timestamp t);
Timestamp timestamp_from_json(const json& j);

/// Encodes a map keyed by PromptPart as an object keyed "P4.2".
template <class V>
json prompt_map_json(const std::map<PromptPart, V>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[to_key(k)] = v;
  return out;
}

template <class V>
std::map<PromptPart, V> prompt_map_from_json(const json& j) {
  std::map<PromptPart, V> out;
  if (j.is_null()) return out;
  for (const auto& [k, v] : j.items()) {
    auto key = prompt_part_from_key(k);
    if (!key) fail(ErrorCode::BadRequest, "bad prompt key: " + k);
    out.emplace(*key, v.template get<V>());
  }
  return out;
}

}  // namespace voice_ehr

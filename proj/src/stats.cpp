#include "voice_ehr/stats.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "voice_ehr/codec.hpp"
#include "voice_ehr/error.hpp"

namespace voice_ehr {

namespace fs = std::filesystem;

namespace {

constexpr const char* kNoResponse = "NoResponse";

bool included(const SessionRecord& r) { return r.inclusion && r.inclusion->included; }

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<SessionRecord> sorted_by_id(std::vector<SessionRecord> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<int> decade_age_edges() { return {0, 10, 20, 30, 40, 50, 60, 70, 80, 90}; }

DemographicReport demographic_report(const std::vector<SessionRecord>& dataset, const std::vector<int>& edges) {
  DemographicReport rep;

  for (const auto& [cat, name] : EnumTable<RaceCategory>::entries)
    if (cat != RaceCategory::NoResponse) rep.by_race.emplace_back(std::string(name), 0);
  rep.by_race.emplace_back(kNoResponse, 0);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string label = i + 1 < edges.size()
                                  ? std::to_string(edges[i]) + "-" + std::to_string(edges[i + 1] - 1)
                                  : std::to_string(edges[i]) + "+";
    rep.by_age.emplace_back(label, 0);
  }
  rep.by_age.emplace_back(kNoResponse, 0);
  for (const auto& [loc, name] : EnumTable<RecordingLocation>::entries) rep.by_location.emplace_back(std::string(name), 0);
  rep.by_location.emplace_back(kNoResponse, 0);

  auto bump = [](Breakdown& b, const std::string& key) {
    for (auto& [k, v] : b)
      if (k == key) {
        ++v;
        return;
      }
    b.emplace_back(key, 1);
  };

  std::map<std::string, int> gender;
  int gender_none = 0;
  for (const auto& r : dataset) {
    if (!included(r)) continue;
    ++rep.n_total;
    if (!r.profile) {
      bump(rep.by_race, kNoResponse);
      bump(rep.by_age, kNoResponse);
      bump(rep.by_location, kNoResponse);
      ++gender_none;
      continue;
    }
    const auto& p = *r.profile;
    bump(rep.by_race, std::string(enum_name(p.race.category)));

    std::size_t bin = edges.size();
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (p.age >= edges[i]) bin = i;
    if (bin == edges.size() || p.age < 0)
      bump(rep.by_age, kNoResponse);
    else
      ++rep.by_age[bin].second;

    bump(rep.by_location, std::string(enum_name(p.recording_location)));

    std::string g = p.gender_identity ? trim(*p.gender_identity) : std::string();
    if (g.empty() && p.sex != Sex::NoResponse) g = std::string(enum_name(p.sex));
    if (g.empty())
      ++gender_none;
    else
      ++gender[g];
  }
  for (const auto& [k, v] : gender) rep.by_gender_identity.emplace_back(k, v);
  rep.by_gender_identity.emplace_back(kNoResponse, gender_none);
  return rep;
}

Breakdown condition_prevalence(const std::vector<SessionRecord>& dataset) {
  std::map<std::string, int> counts;
  for (const auto& r : dataset)
    if (included(r) && r.profile)
      for (const auto& tag : r.profile->health_history.tags) ++counts[tag];
  Breakdown out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

ManifestTotals manifest_totals(const std::vector<SessionRecord>& dataset) {
  ManifestTotals t;
  for (const auto& r : dataset) {
    if (!included(r)) {
      ++t.n_excluded;
      continue;
    }
    ++t.n_included;
    for (const auto& [_, s] : r.audio) t.total_audio_seconds += s.duration_s;
  }
  t.total_audio_hours = t.total_audio_seconds / 3600.0;
  return t;
}

DatasetManifest export_manifest(const std::vector<SessionRecord>& dataset, const BlobStore& blobs,
                                const fs::path& dest, Timestamp created_at) {
  DatasetManifest m;
  m.created_at = created_at;
  m.sessions = sorted_by_id(dataset);
  m.totals = manifest_totals(m.sessions);

  for (const auto& r : m.sessions)
    for (const auto& [_, s] : r.audio)
      if (!blobs.verify(s.checksum, "pcm")) fail(ErrorCode::DanglingBlobRef, s.checksum);

  std::error_code ec;
  fs::create_directories(dest, ec);
  if (ec) fail(ErrorCode::IoFailure, dest.string() + ": " + ec.message());

  std::string lines;
  for (const auto& r : m.sessions) lines += json(r).dump() + "\n";
  write_file_atomic(dest / "manifest.jsonl", lines);

  const json summary{{"schema_version", m.schema_version},
                     {"created_at", timestamp_json(created_at)},
                     {"totals", m.totals},
                     {"demographics", demographic_report(m.sessions)},
                     {"condition_prevalence", condition_prevalence(m.sessions)}};
  write_file_atomic(dest / "summary.json", summary.dump(2) + "\n");

  std::ostringstream csv;
  csv << "session_id,cohort,included,rules_fired,n_audio,audio_seconds,asr_quality_wer\n";
  for (const auto& r : m.sessions) {
    std::string rules;
    double secs = 0.0;
    if (r.inclusion)
      for (auto rule : r.inclusion->rules_fired) rules += (rules.empty() ? "" : ";") + std::string(enum_name(rule));
    for (const auto& [_, s] : r.audio) secs += s.duration_s;
    csv << csv_field(r.session_id) << ',' << enum_name(r.cohort) << ','
        << (r.inclusion && r.inclusion->included ? "true" : "false") << ',' << rules << ',' << r.audio.size() << ','
        << json(secs).dump() << ',' << (r.asr_quality_wer ? json(*r.asr_quality_wer).dump() : "") << '\n';
  }
  write_file_atomic(dest / "summary.csv", csv.str());
  return m;
}

DatasetManifest import_manifest(const fs::path& dir) {
  DatasetManifest m;
  std::ifstream summary_in(dir / "summary.json");
  if (!summary_in) fail(ErrorCode::NotFound, (dir / "summary.json").string());
  try {
    const json summary = json::parse(summary_in);
    m.schema_version = summary.at("schema_version").get<std::string>();
    m.created_at = timestamp_from_json(summary.at("created_at"));
    m.totals = summary.at("totals").get<ManifestTotals>();
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptLog, std::string("summary.json: ") + e.what());
  }

  std::ifstream in(dir / "manifest.jsonl");
  if (!in) fail(ErrorCode::NotFound, (dir / "manifest.jsonl").string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.sessions.push_back(json::parse(line).get<SessionRecord>());
    } catch (const json::exception& e) {
      fail(ErrorCode::CorruptLog, "manifest.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

void to_json(json& j, const DemographicReport& r) {
  auto obj = [](const Breakdown& b) {
    json a = json::array();
    for (const auto& [k, v] : b) a.push_back({{"bucket", k}, {"count", v}});
    return a;
  };
  j = {{"n_total", r.n_total},
       {"race", obj(r.by_race)},
       {"age", obj(r.by_age)},
       {"gender_identity", obj(r.by_gender_identity)},
       {"location", obj(r.by_location)}};
}

void to_json(json& j, const ManifestTotals& t) {
  j = {{"n_included", t.n_included},
       {"n_excluded", t.n_excluded},
       {"total_audio_seconds", t.total_audio_seconds},
       {"total_audio_hours", t.total_audio_hours}};
}

void from_json(const json& j, ManifestTotals& t) {
  t.n_included = j.at("n_included").get<int>();
  t.n_excluded = j.at("n_excluded").get<int>();
  t.total_audio_seconds = j.at("total_audio_seconds").get<double>();
  t.total_audio_hours = j.at("total_audio_hours").get<double>();
}

}  // namespace voice_ehr

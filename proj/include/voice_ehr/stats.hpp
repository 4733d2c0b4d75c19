#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "voice_ehr/blob_store.hpp"
#include "voice_ehr/domain.hpp"

namespace voice_ehr {

inline constexpr std::string_view kManifestSchemaVersion = "1";

using Breakdown = std::vector<std::pair<std::string, int>>;

struct DemographicReport {
  int n_total = 0;
  Breakdown by_race;
  Breakdown by_age;
  Breakdown by_gender_identity;
  Breakdown by_location;

  bool operator==(const DemographicReport&) const = default;
};

/// Lower edges of the age bins; the last bin is open ("90+").
std::vector<int> decade_age_edges();

/// Counts over included sessions. Every breakdown ends with a NoResponse bucket and
/// sums to n_total. Gender identity falls back to the recorded sex when the free-text
/// answer was skipped.
DemographicReport demographic_report(const std::vector<SessionRecord>& dataset,
                                     const std::vector<int>& age_edges = decade_age_edges());

/// Health-history tag counts over included sessions, descending, ties alphabetical.
Breakdown condition_prevalence(const std::vector<SessionRecord>& dataset);

struct ManifestTotals {
  int n_included = 0;
  int n_excluded = 0;
  double total_audio_seconds = 0.0;
  double total_audio_hours = 0.0;

  bool operator==(const ManifestTotals&) const = default;
};

struct DatasetManifest {
  std::string schema_version{kManifestSchemaVersion};
  Timestamp created_at{};
  std::vector<SessionRecord> sessions;  // sorted by session_id
  ManifestTotals totals;
};

ManifestTotals manifest_totals(const std::vector<SessionRecord>& dataset);

/// Writes <dest>/manifest.jsonl, summary.json and summary.csv. Every audio reference is
/// checked against the blob store first (DanglingBlobRef names the missing checksum);
/// nothing is written when a check fails. Output is byte-stable apart from created_at.
DatasetManifest export_manifest(const std::vector<SessionRecord>& dataset, const BlobStore& blobs,
                                const std::filesystem::path& dest, Timestamp created_at);

/// Reads an export back. CorruptLog on a malformed line.
DatasetManifest import_manifest(const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const DemographicReport& r);
void to_json(nlohmann::json& j, const ManifestTotals& t);
void from_json(const nlohmann::json& j, ManifestTotals& t);

}  // namespace voice_ehr

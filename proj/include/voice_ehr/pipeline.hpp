#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voice_ehr/acoustics.hpp"
#include "voice_ehr/blob_store.hpp"
#include "voice_ehr/session_store.hpp"
#include "voice_ehr/transcription.hpp"

namespace voice_ehr {

struct PipelineOptions {
  bool transcribe = true;
  bool metrics = true;
  bool curate = true;
  TranscribeOptions transcription;
  AcousticConfig acoustic;
  /// Restrict the batch to these sessions (empty: all).
  std::vector<std::string> session_ids;
};

struct PipelineReport {
  int sessions_seen = 0;
  int sessions_frozen = 0;  // frozen by this run
  int sessions_abandoned = 0;
  int sessions_skipped = 0;  // still in progress
  int transcripts_added = 0;
  int transcription_failures = 0;
  int metrics_computed = 0;
  int included = 0;
  int excluded = 0;
};

/// Idempotent batch over the store. Sessions idle past the limit are abandoned;
/// Complete and Abandoned sessions are frozen, then measured, transcribed (when an
/// ASR client is given) and curated. In-progress sessions are left alone. Curation
/// stamps decided_at with the freeze time, so re-runs reproduce the same decision.
PipelineReport run_pipeline(SessionStore& store, const BlobStore& blobs, AsrClient* asr,
                            const PipelineOptions& options = {});

/// Every stored session as a record, sorted by id.
std::vector<SessionRecord> load_dataset(SessionStore& store);

void to_json(nlohmann::json& j, const PipelineReport& r);

}  // namespace voice_ehr

#include "voice_ehr/pipeline.hpp"

#include <spdlog/spdlog.h>

#include "voice_ehr/codec.hpp"
#include "voice_ehr/curation.hpp"
#include "voice_ehr/error.hpp"

namespace voice_ehr {

PipelineReport run_pipeline(SessionStore& store, const BlobStore& blobs, AsrClient* asr,
                            const PipelineOptions& options) {
  PipelineReport rep;
  const auto ids = options.session_ids.empty() ? store.list() : options.session_ids;
  const AudioLoader load = [&](const AudioSample& s) { return blobs.read_canonical(s.checksum); };

  for (const auto& id : ids) {
    ++rep.sessions_seen;
    store.with_lock(id, [&] {
      SessionState s = store.get(id);
      if (!s.frozen) {
        const SessionState idle = abandon_if_idle(s, store.now());
        if (idle.status == SessionStatus::Abandoned && s.status != SessionStatus::Abandoned) {
          s = store.append(id, Event{EventType::Abandon, s.current_page, json::object(), store.now()});
          ++rep.sessions_abandoned;
        }
        if (s.status != SessionStatus::Complete && s.status != SessionStatus::Abandoned) {
          ++rep.sessions_skipped;
          return;
        }
        s = store.append(id, Event{EventType::Freeze, s.current_page, json::object(), store.now()});
        ++rep.sessions_frozen;
      }

      SessionRecord r = store.record(id);
      if (options.metrics) {
        for (const auto& [pp, sample] : r.audio) {
          try {
            r.metrics[pp] = measure(load(sample), pp, options.acoustic);
            ++rep.metrics_computed;
          } catch (const Error& e) {
            spdlog::warn("metrics failed for {} {}: {}", id, to_key(pp), e.what());
          }
        }
      }
      if (options.transcribe && asr) {
        const auto t = transcribe_session(r, *asr, load, options.transcription);
        rep.transcripts_added += t.succeeded;
        rep.transcription_failures += t.failed;
      }
      if (options.curate) {
        r.inclusion = curate(r, s.last_event_at);
        ++(r.inclusion->included ? rep.included : rep.excluded);
      }
      store.save_derived(r);
    });
  }
  return rep;
}

std::vector<SessionRecord> load_dataset(SessionStore& store) {
  std::vector<SessionRecord> out;
  for (const auto& id : store.list()) out.push_back(store.record(id));
  return out;
}

void to_json(nlohmann::json& j, const PipelineReport& r) {
  j = {{"sessions_seen", r.sessions_seen},
       {"sessions_frozen", r.sessions_frozen},
       {"sessions_abandoned", r.sessions_abandoned},
       {"sessions_skipped", r.sessions_skipped},
       {"transcripts_added", r.transcripts_added},
       {"transcription_failures", r.transcription_failures},
       {"metrics_computed", r.metrics_computed},
       {"included", r.included},
       {"excluded", r.excluded}};
}

}  // namespace voice_ehr

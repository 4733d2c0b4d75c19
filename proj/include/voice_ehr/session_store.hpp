#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "voice_ehr/protocol.hpp"

namespace voice_ehr {

/// Durable sessions: <root>/<session_id>/events.jsonl (the source of truth) plus
/// derived.json holding pipeline output (transcripts, metrics, inclusion). State is
/// rebuilt by replaying the log; every mutation is validated by the engine before it
/// is appended, and requests for one session are linearized by a per-session mutex.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root, Clock clock = system_clock());

  const std::filesystem::path& root() const { return root_; }

  SessionState create(Cohort cohort, const std::string& screening_answer = {});
  /// NotFound for an unknown id.
  SessionState get(const std::string& session_id);
  bool exists(const std::string& session_id);
  std::vector<std::string> list() const;

  /// Builds an event from the current state under the session lock, applies it and
  /// appends it to the log. The event timestamp is filled from the clock when unset.
  SessionState mutate(const std::string& session_id, const std::function<Event(const SessionState&)>& make);
  SessionState append(const std::string& session_id, Event event);

  std::vector<Event> events(const std::string& session_id);

  /// Finalized samples referenced by attach_audio events.
  std::map<PromptPart, AudioSample> samples(const std::string& session_id);

  /// Engine state + samples + stored pipeline output.
  SessionRecord record(const std::string& session_id);
  /// Persists the pipeline-owned fields of `record` (transcripts, failures, metrics,
  /// asr_quality_wer, inclusion, sample quality).
  void save_derived(const SessionRecord& record);

  /// Runs `fn` while holding the session's lock (single-flight pipeline steps).
  void with_lock(const std::string& session_id, const std::function<void()>& fn);

  Timestamp now() const { return clock_(); }

 private:
  struct Entry {
    std::recursive_mutex mu;
    std::optional<SessionState> state;
  };

  std::shared_ptr<Entry> entry(const std::string& session_id);
  SessionState load(const std::string& session_id, Entry& e);
  std::filesystem::path dir(const std::string& session_id) const { return root_ / session_id; }

  std::filesystem::path root_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
};

}  // namespace voice_ehr

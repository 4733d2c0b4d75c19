#include "voice_ehr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <numeric>
#include <regex>
#include <thread>

#include <spdlog/spdlog.h>

#include "voice_ehr/codec.hpp"
#include "voice_ehr/error.hpp"

namespace voice_ehr {

// ---------------------------------------------------------------------------
// Mock client
// ---------------------------------------------------------------------------

MockLlm::MockLlm(std::vector<std::string> replies, std::string tag)
    : replies_(std::move(replies)), tag_(std::move(tag)) {}

MockLlm::MockLlm(Responder responder, std::string tag) : responder_(std::move(responder)), tag_(std::move(tag)) {}

std::string MockLlm::complete(const std::vector<ChatMessage>& messages) {
  std::unique_lock lock(mu_);
  const int index = calls_++;
  if (responder_) {
    auto r = responder_;
    lock.unlock();
    return r(messages);
  }
  if (replies_.empty()) fail(ErrorCode::LlmUnavailable, "mock has no replies");
  return replies_[std::min<std::size_t>(static_cast<std::size_t>(index), replies_.size() - 1)];
}

int MockLlm::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---------------------------------------------------------------------------
// Comparison documents
// ---------------------------------------------------------------------------

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

const nlohmann::json* answer(const SessionRecord& r, int page, const char* name) {
  auto it = r.answers_by_page.find(page);
  if (it == r.answers_by_page.end() || !it->second.is_object()) return nullptr;
  auto f = it->second.find(name);
  if (f == it->second.end() || f->is_null()) return nullptr;
  return &*f;
}

// Multi-select answers are rendered the way the survey export shows them: options in
// entry order separated by single spaces.
std::string render_answer(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ' ';
      out += item.is_string() ? item.get<std::string>() : item.dump();
    }
    return out;
  }
  return v.dump();
}

std::string required_answer(const SessionRecord& r, int page, const char* name, const char* notes) {
  const auto* v = answer(r, page, name);
  if (!v || (v->is_array() && v->empty()) || (v->is_string() && blank(v->get<std::string>())))
    fail(ErrorCode::MissingManualField, name);
  std::string out = render_answer(*v);
  if (notes) {
    if (const auto* n = answer(r, page, notes); n && n->is_string() && !blank(n->get<std::string>()))
      out += " (" + n->get<std::string>() + ")";
  }
  return out;
}

std::string transcript_text(const SessionRecord& r, PromptId id) {
  auto it = r.transcripts.find(PromptPart{id, 1});
  if (it == r.transcripts.end() || blank(it->second.text))
    fail(ErrorCode::MissingTranscript, std::string(enum_name(id)));
  return it->second.text;
}

}  // namespace

std::string ComparisonDoc::render() const {
  return "MANUALLY ENTERED INFORMATION\n" + manual_block + "\n\nAUDIO TRANSCRIPTS\n" + transcript_block + "\n";
}

std::vector<std::string> eligible_sessions(const std::vector<SessionRecord>& dataset) {
  std::vector<std::string> out;
  for (const auto& r : dataset) {
    if (r.cohort != Cohort::Patient || !r.inclusion || !r.inclusion->included) continue;
    auto has = [&](PromptId id) {
      auto it = r.transcripts.find(PromptPart{id, 1});
      return it != r.transcripts.end() && !blank(it->second.text);
    };
    if (has(PromptId::HealthBaseline) && has(PromptId::IllnessTrajectory)) out.push_back(r.session_id);
  }
  return out;
}

ComparisonDoc build_comparison_doc(const SessionRecord& r) {
  ComparisonDoc d;
  d.session_id = r.session_id;
  const std::string history = required_answer(r, 3, "health_history", "health_history_notes");
  const std::string symptoms = required_answer(r, 4, "symptoms", "symptoms_notes");
  const std::string progression = required_answer(r, 4, "symptom_progression", nullptr);
  const auto* dur = answer(r, 4, "symptom_duration_days");
  if (!dur || !dur->is_number()) fail(ErrorCode::MissingManualField, "symptom_duration_days");
  const auto days = dur->get<double>();
  std::string duration = render_answer(*dur) + (days == 1.0 ? " day" : " days");

  d.manual_block = "Co-morbidities/health challenges: " + history + "\n" +
                   "Current symptoms: " + symptoms + "\n" +
                   "Progression of symptoms: " + progression + "\n" +
                   "Duration of symptoms: " + duration;
  d.transcript_block = "Prompt 1 (health history): " + transcript_text(r, PromptId::HealthBaseline) + "\n" +
                       "Prompt 2 (current illness): " + transcript_text(r, PromptId::IllnessTrajectory);
  return d;
}

// ---------------------------------------------------------------------------
// Rating
// ---------------------------------------------------------------------------

std::string rubric_system_prompt() {
  return "You compare two descriptions of the same patient's health. Source A is information the "
         "patient entered manually in a survey. Source B is transcripts of the patient speaking "
         "freely about their health history and current illness.\n"
         "Rate how informative the audio transcripts are relative to the manually entered information:\n"
         "1 = manually entered data is significantly more informative\n"
         "2 = manually entered data is somewhat more informative\n"
         "3 = both are equally informative\n"
         "4 = audio transcripts are somewhat more informative\n"
         "5 = audio transcripts are significantly more informative\n"
         "Briefly justify the rating, then end with a line of the form RATING: <k> where k is 1, 2, 3, 4 or 5.";
}

std::vector<ChatMessage> rubric_messages(const ComparisonDoc& doc) {
  return {{"system", rubric_system_prompt()}, {"user", doc.render()}};
}

std::optional<int> parse_rating(std::string_view response) {
  static const std::regex re(R"(RATING\s*:\s*\**\s*(-?\d+))", std::regex::icase);
  std::optional<long> last;
  const std::string text(response);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    try {
      last = std::stol((*it)[1].str());
    } catch (const std::exception&) {
      last = -1;
    }
  }
  if (!last || *last < 1 || *last > 5) return std::nullopt;
  return static_cast<int>(*last);
}

RubricRating rate_pair(const ComparisonDoc& doc, LlmClient& llm, Clock clock) {
  auto messages = rubric_messages(doc);
  std::string reply = llm.complete(messages);
  std::string raw = reply;
  auto rating = parse_rating(reply);
  if (!rating) {
    messages.push_back({"assistant", reply});
    messages.push_back({"user", "Your reply must end with a single line of the form RATING: <k>, where k is "
                                "an integer from 1 to 5. Reply again with that line."});
    reply = llm.complete(messages);
    raw += "\n---\n" + reply;
    rating = parse_rating(reply);
  }
  if (!rating) fail(ErrorCode::UnparseableRating, doc.session_id);
  return RubricRating{doc.session_id, *rating, raw, llm.model_tag(), clock()};
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

RatingAggregate aggregate_histogram(const std::array<int, 5>& h) {
  RatingAggregate a;
  a.histogram = h;
  a.n = std::accumulate(h.begin(), h.end(), 0);
  if (a.n <= 0) fail(ErrorCode::EmptyInput, "no ratings");
  double sum = 0.0;
  for (int k = 0; k < 5; ++k) sum += static_cast<double>((k + 1) * h[k]);
  a.mean = sum / a.n;
  double ss = 0.0;
  for (int k = 0; k < 5; ++k) ss += h[k] * ((k + 1) - a.mean) * ((k + 1) - a.mean);
  a.std_dev = std::sqrt(ss / a.n);
  a.sample_std_dev = a.n > 1 ? std::sqrt(ss / (a.n - 1)) : 0.0;
  const int mid = (a.n - 1) / 2;  // lower middle
  int seen = 0;
  for (int k = 0; k < 5; ++k) {
    seen += h[k];
    if (seen > mid) {
      a.median = k + 1;
      break;
    }
  }
  a.pct_gt2 = 100.0 * (h[2] + h[3] + h[4]) / a.n;
  a.pct_eq5 = 100.0 * h[4] / a.n;
  return a;
}

RatingAggregate aggregate(std::span<const int> ratings) {
  if (ratings.empty()) fail(ErrorCode::EmptyInput, "no ratings");
  std::array<int, 5> h{};
  for (int r : ratings) {
    if (r < 1 || r > 5) fail(ErrorCode::BadRequest, "rating out of range: " + std::to_string(r));
    ++h[r - 1];
  }
  return aggregate_histogram(h);
}

RatingAggregate aggregate(const std::vector<RubricRating>& ratings) {
  std::vector<int> v;
  v.reserve(ratings.size());
  for (const auto& r : ratings) v.push_back(r.rating);
  return aggregate(v);
}

namespace {

long round2(double x) { return std::lround(x * 100.0 + 1e-9); }

long pct(double x, Rounding r) {
  return r == Rounding::Truncate ? static_cast<long>(std::floor(x + 1e-9)) : std::lround(x + 1e-9);
}

}  // namespace

bool reproduces(const RatingAggregate& a, const HistogramTargets& t, StdFlavor flavor, Rounding rounding) {
  if (a.n != t.n) return false;
  if (t.mean && round2(a.mean) != round2(*t.mean)) return false;
  if (t.median && a.median != *t.median) return false;
  if (t.std_dev) {
    const double s = flavor == StdFlavor::Sample ? a.sample_std_dev : a.std_dev;
    if (round2(s) != round2(*t.std_dev)) return false;
  }
  if (t.pct_gt2 && pct(a.pct_gt2, rounding) != *t.pct_gt2) return false;
  if (t.pct_eq5 && pct(a.pct_eq5, rounding) != *t.pct_eq5) return false;
  return true;
}

std::vector<OracleMatch> all_consistent_histograms(const HistogramTargets& t, const OracleOptions& o) {
  if (t.n < 1 || t.n > 200) fail(ErrorCode::BadRequest, "n must be in 1..200");
  std::vector<StdFlavor> flavors;
  if (o.std_flavor != StdFlavor::Sample) flavors.push_back(StdFlavor::Population);
  if (o.std_flavor != StdFlavor::Population) flavors.push_back(StdFlavor::Sample);
  std::vector<Rounding> roundings;
  if (o.pct_rounding != Rounding::Truncate) roundings.push_back(Rounding::Round);
  if (o.pct_rounding != Rounding::Round) roundings.push_back(Rounding::Truncate);

  std::vector<OracleMatch> out;
  const int n = t.n;
  for (int c1 = 0; c1 <= n; ++c1)
    for (int c2 = 0; c1 + c2 <= n; ++c2)
      for (int c3 = 0; c1 + c2 + c3 <= n; ++c3)
        for (int c4 = 0; c1 + c2 + c3 + c4 <= n; ++c4) {
          const std::array<int, 5> h{c1, c2, c3, c4, n - c1 - c2 - c3 - c4};
          const auto a = aggregate_histogram(h);
          bool found = false;
          for (auto f : flavors) {
            for (auto r : roundings) {
              if (reproduces(a, t, f, r)) {
                out.push_back({h, f, r});
                found = true;
                break;
              }
            }
            if (found) break;
          }
        }
  return out;
}

std::optional<OracleMatch> find_consistent_histogram(const HistogramTargets& t, const OracleOptions& o) {
  auto all = all_consistent_histograms(t, o);
  if (all.empty()) return std::nullopt;
  return all.front();
}

// ---------------------------------------------------------------------------
// Batch
// ---------------------------------------------------------------------------

EvalReport run_eval(const std::vector<SessionRecord>& dataset, LlmClient& llm, int concurrency, Clock clock) {
  std::vector<const SessionRecord*> jobs;
  const auto ids = eligible_sessions(dataset);
  for (const auto& r : dataset)
    if (std::find(ids.begin(), ids.end(), r.session_id) != ids.end()) jobs.push_back(&r);

  std::vector<std::optional<RubricRating>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = rate_pair(build_comparison_doc(*jobs[i]), llm, clock);
      } catch (const Error& e) {
        errors[i] = std::string(to_string(e.code())) + ": " + e.detail();
      }
    }
  };
  const int threads = std::clamp<int>(concurrency, 1, std::max<int>(1, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  EvalReport report;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (results[i])
      report.ratings.push_back(*results[i]);
    else
      report.failures.emplace_back(jobs[i]->session_id, errors[i]);
  }
  if (!report.ratings.empty()) report.aggregate = aggregate(report.ratings);
  return report;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const ComparisonDoc& d) {
  j = {{"session_id", d.session_id},
       {"manual_block", d.manual_block},
       {"transcript_block", d.transcript_block},
       {"template_version", d.template_version}};
}

void to_json(nlohmann::json& j, const RubricRating& r) {
  j = {{"session_id", r.session_id},
       {"rating", r.rating},
       {"raw_response", r.raw_response},
       {"model_tag", r.model_tag},
       {"rated_at", timestamp_json(r.rated_at)}};
}

void to_json(nlohmann::json& j, const RatingAggregate& a) {
  j = {{"n", a.n},
       {"mean", a.mean},
       {"median", a.median},
       {"std_dev", a.std_dev},
       {"sample_std_dev", a.sample_std_dev},
       {"pct_gt2", a.pct_gt2},
       {"pct_eq5", a.pct_eq5},
       {"histogram", a.histogram}};
}

void to_json(nlohmann::json& j, const OracleMatch& m) {
  j = {{"histogram", m.histogram}, {"std_flavor", m.std_flavor}, {"pct_rounding", m.pct_rounding}};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"ratings", r.ratings}, {"aggregate", r.aggregate ? nlohmann::json(*r.aggregate) : nlohmann::json(nullptr)}};
  auto& f = j["failures"] = nlohmann::json::array();
  for (const auto& [id, why] : r.failures) f.push_back({{"session_id", id}, {"error", why}});
}

}  // namespace voice_ehr

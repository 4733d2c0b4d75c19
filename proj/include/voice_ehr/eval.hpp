#pragma once

#include <array>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "voice_ehr/domain.hpp"
#include "voice_ehr/timeutil.hpp"

namespace voice_ehr {

inline constexpr std::string_view kRubricTemplateVersion = "rubric-v1";

struct ComparisonDoc {
  std::string session_id;
  std::string manual_block;
  std::string transcript_block;
  std::string template_version{kRubricTemplateVersion};

  std::string render() const;
  bool operator==(const ComparisonDoc&) const = default;
};

struct RubricRating {
  std::string session_id;
  int rating = 0;
  std::string raw_response;
  std::string model_tag;
  Timestamp rated_at{};
};

struct RatingAggregate {
  int n = 0;
  double mean = 0.0;
  int median = 0;  // lower middle for even n
  double std_dev = 0.0;         // population
  double sample_std_dev = 0.0;  // n - 1 denominator; 0 for n = 1
  double pct_gt2 = 0.0;
  double pct_eq5 = 0.0;
  std::array<int, 5> histogram{};  // counts of ratings 1..5

  bool operator==(const RatingAggregate&) const = default;
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

/// Chat-completion boundary. complete() throws Error(LlmUnavailable) on transport failure.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string model_tag() const = 0;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

/// Scripted client: replies come from `responder`, or from a fixed queue that repeats
/// its last entry.
class MockLlm : public LlmClient {
 public:
  using Responder = std::function<std::string(const std::vector<ChatMessage>&)>;

  explicit MockLlm(std::vector<std::string> replies, std::string tag = "mock-llm-1");
  explicit MockLlm(Responder responder, std::string tag = "mock-llm-1");

  std::string model_tag() const override { return tag_; }
  std::string complete(const std::vector<ChatMessage>& messages) override;
  int calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  Responder responder_;
  std::string tag_;
  int calls_ = 0;
};

/// Included Patient sessions with non-blank P1 and P2 transcripts, in input order.
std::vector<std::string> eligible_sessions(const std::vector<SessionRecord>& dataset);

/// Deterministic rendering of the four manual variables (health history, symptoms,
/// progression, duration) from survey pages 3-4 and the P1 + P2 transcripts.
/// MissingTranscript / MissingManualField when an input is absent.
ComparisonDoc build_comparison_doc(const SessionRecord& record);

std::string rubric_system_prompt();
std::vector<ChatMessage> rubric_messages(const ComparisonDoc& doc);

/// Last "RATING: k" in the text with k in 1..5.
std::optional<int> parse_rating(std::string_view response);

/// One retry with a reminder on a malformed reply, then UnparseableRating.
RubricRating rate_pair(const ComparisonDoc& doc, LlmClient& llm, Clock clock = system_clock());

/// EmptyInput for no ratings; BadRequest for a rating outside 1..5.
RatingAggregate aggregate(std::span<const int> ratings);
RatingAggregate aggregate(const std::vector<RubricRating>& ratings);
RatingAggregate aggregate_histogram(const std::array<int, 5>& histogram);

enum class StdFlavor { Population, Sample, Either };
enum class Rounding { Round, Truncate, Either };

/// Targets as reported: mean and std to 2 decimals, percentages as integers.
struct HistogramTargets {
  int n = 0;
  std::optional<double> mean;
  std::optional<int> median;
  std::optional<double> std_dev;
  std::optional<int> pct_gt2;
  std::optional<int> pct_eq5;
};

struct OracleOptions {
  StdFlavor std_flavor = StdFlavor::Either;
  Rounding pct_rounding = Rounding::Either;
};

struct OracleMatch {
  std::array<int, 5> histogram{};
  StdFlavor std_flavor = StdFlavor::Population;  // which flavor reproduced the std target
  Rounding pct_rounding = Rounding::Round;       // which rule reproduced the percentages
};

/// Whether `agg` reproduces every present target under one concrete flavor/rounding.
bool reproduces(const RatingAggregate& agg, const HistogramTargets& t, StdFlavor flavor, Rounding rounding);

/// Exhaustive search over (c1..c5), lexicographic from (0,0,0,0,n); first match or none.
/// BadRequest for n outside 1..200.
std::optional<OracleMatch> find_consistent_histogram(const HistogramTargets& targets,
                                                     const OracleOptions& options = {});
std::vector<OracleMatch> all_consistent_histograms(const HistogramTargets& targets,
                                                   const OracleOptions& options = {});

struct EvalReport {
  std::vector<RubricRating> ratings;
  std::vector<std::pair<std::string, std::string>> failures;  // session_id, reason
  std::optional<RatingAggregate> aggregate;
};

/// Rates every eligible session (up to `concurrency` in flight) and aggregates.
EvalReport run_eval(const std::vector<SessionRecord>& dataset, LlmClient& llm, int concurrency = 2,
                    Clock clock = system_clock());

VOICE_EHR_ENUM_TABLE(StdFlavor, {StdFlavor::Population, "population"}, {StdFlavor::Sample, "sample"},
                     {StdFlavor::Either, "either"});
VOICE_EHR_ENUM_TABLE(Rounding, {Rounding::Round, "round"}, {Rounding::Truncate, "truncate"},
                     {Rounding::Either, "either"});

void to_json(nlohmann::json& j, const ComparisonDoc& d);
void to_json(nlohmann::json& j, const RubricRating& r);
void to_json(nlohmann::json& j, const RatingAggregate& a);
void to_json(nlohmann::json& j, const OracleMatch& m);
void to_json(nlohmann::json& j, const EvalReport& r);

}  // namespace voice_ehr

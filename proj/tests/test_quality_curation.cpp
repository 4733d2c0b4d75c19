#include <gtest/gtest.h>

#include <random>

#include "corpus.hpp"
#include "fixtures.hpp"
#include "voice_ehr/curation.hpp"
#include "voice_ehr/error.hpp"
#include "voice_ehr/quality.hpp"

using namespace voice_ehr;
using namespace voice_ehr::testing;

namespace {

const PromptPart kP1{PromptId::HealthBaseline, 1};
const PromptPart kP51{PromptId::Breathing, 1};
const Timestamp kAt = parse_rfc3339("2024-03-05T00:00:00Z");

std::vector<QualityReason> reasons(const PcmAudio& a, PromptPart pp) { return quality_gate(a, pp).reasons; }

}  // namespace

TEST(QualityGate, CleanSpeechPasses) {
  const auto q = quality_gate(fixture_clip(kP1, 0), kP1);
  EXPECT_TRUE(q.passes);
  EXPECT_TRUE(q.reasons.empty());
  EXPECT_NEAR(q.duration_s, 4.0, 1e-9);
}

TEST(QualityGate, DurationBoundsComeFromThePart) {
  EXPECT_EQ(reasons(voiced(150, 2.0, 0.3), kP1), std::vector{QualityReason::TooShort});
  // Breathing part 1 is 20-30 s with 10 s grace above.
  EXPECT_EQ(reasons(breathing(12, 19.0, 10, 1), kP51), std::vector{QualityReason::TooShort});
  EXPECT_TRUE(reasons(breathing(12, 39.0, 10, 1), kP51).empty());
  EXPECT_EQ(reasons(breathing(12, 41.0, 10, 1), kP51), std::vector{QualityReason::TooLong});
}

TEST(QualityGate, NearSilenceAndClipping) {
  EXPECT_EQ(reasons(voiced(150, 4.0, 0.005), kP1), std::vector{QualityReason::NearSilence});
  auto loud = voiced(150, 4.0, 3.0);  // driven far past full scale
  for (auto& s : loud.samples) s = std::clamp(s, -1.0f, 1.0f);
  EXPECT_EQ(reasons(loud, kP1), std::vector{QualityReason::Clipping});
  EXPECT_EQ(reasons(silence(1.0), kP1), (std::vector{QualityReason::TooShort, QualityReason::NearSilence}));
}

TEST(QualityGate, EdgeSilenceIsMeasuredButNotAReason) {
  const auto a = concat({silence(1.0), voiced(150, 3.0, 0.3), silence(0.5)});
  const auto q = quality_gate(a, kP1);
  EXPECT_TRUE(q.passes);
  EXPECT_NEAR(q.leading_trailing_silence_s, 1.5, 0.05);
}

TEST(QualityGate, ThresholdsAreConfigurable) {
  QualityConfig strict;
  strict.near_silence_dbfs = -10.0;
  EXPECT_FALSE(quality_gate(fixture_clip(kP1, 0), kP1, strict).passes);
}

TEST(Curation, CorpusHasTwentySessionsCoveringEveryCombination) {
  const auto corpus = curation_corpus();
  ASSERT_EQ(corpus.size(), 20u);
  std::set<std::set<ExclusionRule>> seen;
  for (const auto& c : corpus) seen.insert(c.expected);
  EXPECT_EQ(seen.size(), 8u);  // the empty set, three singles, three pairs, the triple
}

TEST(Curation, CorpusDecisionsMatchExactly) {
  for (const auto& c : curation_corpus()) {
    const auto d = curate(c.record, kAt);
    const InclusionDecision want{c.expected.empty(), c.expected, kAt};
    EXPECT_EQ(d, want) << c.label;
  }
}

TEST(Curation, RequiresFrozenRecord) {
  auto r = curation_corpus()[0].record;
  r.frozen = false;
  try {
    curate(r, kAt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SessionNotFrozen);
  }
}

TEST(CurationProperty, PureAndMonotoneUnderDamage) {
  // Removing a page answer or a transcript can only add rules.
  std::mt19937 rng(11);
  for (const auto& c : curation_corpus()) {
    const auto d = curate(c.record, kAt);
    EXPECT_EQ(curate(c.record, kAt), d) << c.label;
    for (int trial = 0; trial < 5; ++trial) {
      auto r = c.record;
      if (!r.answers_by_page.empty() && rng() % 2) {
        auto it = r.answers_by_page.begin();
        std::advance(it, rng() % r.answers_by_page.size());
        r.answers_by_page.erase(it);
      } else if (!r.transcripts.empty()) {
        auto it = r.transcripts.begin();
        std::advance(it, rng() % r.transcripts.size());
        r.transcripts.erase(it);
      }
      const auto damaged = curate(r, kAt);
      for (auto rule : d.rules_fired) EXPECT_TRUE(damaged.rules_fired.count(rule)) << c.label;
      EXPECT_EQ(damaged.included, damaged.rules_fired.empty());
    }
  }
}

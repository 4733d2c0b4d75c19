#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "voice_ehr/acoustics.hpp"
#include "voice_ehr/error.hpp"

using namespace voice_ehr;
using namespace voice_ehr::testing;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::BadRequest;  // sentinel: nothing thrown
}

}  // namespace

// ---- level ----

TEST(RmsDbfs, FullScaleSineIsMinus3dB) {
  // RMS of A*sin is A/sqrt(2): 20*log10(1/sqrt(2)) = -3.0103 dB.
  const auto s = sine(1000.0, 1.0, 1.0);
  EXPECT_NEAR(rms_dbfs(s.samples), -3.0103, 0.01);
}

TEST(RmsDbfs, HalvingAmplitudeDropsSixDb) {
  const auto a = sine(440.0, 1.0, 0.5);
  const auto b = sine(440.0, 1.0, 0.25);
  EXPECT_NEAR(rms_dbfs(a.samples) - rms_dbfs(b.samples), 20 * std::log10(2.0), 1e-6);
}

TEST(RmsDbfs, DigitalSilenceReportsFloor) {
  EXPECT_EQ(rms_dbfs(silence(0.1).samples), -120.0);
  EXPECT_EQ(rms_dbfs(silence(0.1).samples, -90.0), -90.0);
}

TEST(RmsDbfs, EmptyThrows) {
  EXPECT_EQ(code_of([] { rms_dbfs(std::span<const float>{}); }), ErrorCode::EmptySignal);
  EXPECT_EQ(code_of([] { clipping_fraction(std::span<const float>{}); }), ErrorCode::EmptySignal);
}

TEST(ClippingFraction, FullScaleSquareIsOne) {
  std::vector<float> sq(1000);
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = (i / 50) % 2 ? 1.0f : -1.0f;
  EXPECT_DOUBLE_EQ(clipping_fraction(sq), 1.0);
}

TEST(ClippingFraction, HalfClippedIsHalf) {
  std::vector<float> x(1000, 0.1f);
  for (std::size_t i = 0; i < 500; ++i) x[i * 2] = (i % 2) ? -1.0f : 1.0f;
  EXPECT_DOUBLE_EQ(clipping_fraction(x), 0.5);
}

TEST(ClippingFraction, QuietSineIsZero) { EXPECT_EQ(clipping_fraction(sine(200, 1, 0.5).samples), 0.0); }

TEST(EdgeSilence, CountsLeadingAndTrailing) {
  const auto a = concat({silence(0.3), sine(300, 1.0, 0.5), silence(0.2)});
  EXPECT_NEAR(edge_silence_s(a), 0.5, 0.02);
}

// ---- peaks ----

TEST(FindPeaks, PlateauReportsMidpoint) {
  const std::vector<double> x{0, 1, 3, 3, 3, 1, 0};
  const auto p = find_peaks(x, 0.0, 1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].index, 3u);
  EXPECT_DOUBLE_EQ(p[0].prominence, 3.0);
}

TEST(FindPeaks, EndpointsAreNeverPeaks) {
  const std::vector<double> x{5, 1, 2, 1, 5};
  const auto p = find_peaks(x, 0.0, 1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].index, 2u);
}

TEST(FindPeaks, ProminenceIsTopographic) {
  // Small bump on the shoulder of a tall peak: its prominence is measured to the
  // saddle at 4, not to the global minimum.
  const std::vector<double> x{0, 10, 4, 5, 0};
  const auto p = find_peaks(x, 0.0, 1);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_DOUBLE_EQ(p[0].prominence, 10.0);
  EXPECT_DOUBLE_EQ(p[1].prominence, 1.0);
  EXPECT_EQ(find_peaks(x, 2.0, 1).size(), 1u);
}

TEST(FindPeaks, DistanceKeepsTallerPeak) {
  const std::vector<double> x{0, 3, 0, 5, 0, 0, 0, 0, 4, 0};
  const auto p = find_peaks(x, 0.0, 3);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].index, 3u);
  EXPECT_EQ(p[1].index, 8u);
}

// ---- respiratory rate ----

class RespiratoryRateTest : public ::testing::TestWithParam<double> {};

TEST_P(RespiratoryRateTest, WithinOneBpmAtSnr10) {
  const double bpm = GetParam();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto clip = breathing(bpm, 30.0, 10.0, seed);
    const auto t0 = std::chrono::steady_clock::now();
    const auto est = respiratory_rate(clip);
    const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ASSERT_TRUE(est.bpm) << "bpm " << bpm << " seed " << seed;
    EXPECT_NEAR(*est.bpm, bpm, 1.0) << "seed " << seed;
    EXPECT_LT(dt, 1.0);
    EXPECT_GE(est.confidence, 0.0);
    EXPECT_LE(est.confidence, 1.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Rates, RespiratoryRateTest, ::testing::Values(6.0, 12.0, 15.0, 20.0, 30.0));

TEST(RespiratoryRate, TooShortThrows) {
  EXPECT_EQ(code_of([] { respiratory_rate(breathing(12, 5.0, 10, 1)); }), ErrorCode::TooShort);
}

TEST(RespiratoryRate, SilenceHasNoEstimate) {
  const auto est = respiratory_rate(silence(30.0));
  EXPECT_FALSE(est.bpm);
  EXPECT_EQ(est.confidence, 0.0);
}

TEST(RespiratoryRate, InvariantToGain) {
  const auto clip = breathing(15, 30, 10, 7);
  auto quiet = clip;
  for (auto& s : quiet.samples) s *= 0.25f;
  const auto a = respiratory_rate(clip), b = respiratory_rate(quiet);
  ASSERT_TRUE(a.bpm && b.bpm);
  EXPECT_NEAR(*a.bpm, *b.bpm, 0.05);
}

TEST(RespiratoryRate, StableUnderTimeShift) {
  for (double phase : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}) {
    const auto est = respiratory_rate(breathing(20, 30, 10, 11, kCanonicalSampleRate, phase));
    ASSERT_TRUE(est.bpm);
    EXPECT_NEAR(*est.bpm, 20.0, 1.0) << "phase " << phase;
  }
}

TEST(RespiratoryRate, StableAcrossSampleRates) {
  for (int rate : {8000, 22050, 44100}) {
    const auto est = respiratory_rate(breathing(12, 30, 10, 5, rate));
    ASSERT_TRUE(est.bpm);
    EXPECT_NEAR(*est.bpm, 12.0, 1.0) << "rate " << rate;
  }
}

TEST(RespiratoryRate, WindowLimitsAnalysis) {
  // 15 bpm for 30 s followed by 30 s of 30 bpm; a 30 s window only sees the first.
  const auto clip = concat({breathing(15, 30, 10, 3), breathing(30, 30, 10, 4)});
  const auto est = respiratory_rate(clip, 30.0);
  ASSERT_TRUE(est.bpm);
  EXPECT_NEAR(*est.bpm, 15.0, 1.0);
}

// ---- deep breaths ----

class DeepBreathTest : public ::testing::TestWithParam<int> {};

TEST_P(DeepBreathTest, CountsBursts) {
  const int n = GetParam();
  EXPECT_EQ(deep_breath_count(breath_bursts(n, 3.0 * n, 1.2, 42)), n);
}

INSTANTIATE_TEST_SUITE_P(Counts, DeepBreathTest, ::testing::Values(3, 5));

TEST(DeepBreaths, TooShortThrows) {
  EXPECT_EQ(code_of([] { deep_breath_count(breath_bursts(1, 3.0, 1.0, 1)); }), ErrorCode::TooShort);
}

// ---- maximum phonation time ----

TEST(MaxPhonationTime, SingleToneInSilence) {
  const auto a = concat({silence(1.0), voiced(150, 4.2, 0.3), silence(1.0)});
  EXPECT_NEAR(max_phonation_time(a), 4.2, 0.1);
}

TEST(MaxPhonationTime, ShortGapIsBridged) {
  const auto a = concat({silence(0.5), voiced(150, 2.0, 0.3), silence(0.1), voiced(150, 2.0, 0.3), silence(0.5)});
  EXPECT_NEAR(max_phonation_time(a), 4.1, 0.1);
}

TEST(MaxPhonationTime, LongGapSplits) {
  const auto a = concat({silence(0.5), voiced(150, 2.0, 0.3), silence(0.5), voiced(150, 3.0, 0.3), silence(0.5)});
  EXPECT_NEAR(max_phonation_time(a), 3.0, 0.1);
}

TEST(MaxPhonationTime, NoiseIsNotVoiced) {
  auto a = concat({silence(0.5), white_noise(3.0, 0.1, 9), silence(0.5)});
  EXPECT_LT(max_phonation_time(a), 0.2);
}

TEST(MaxPhonationTime, RandomizedSpans) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dur(1.0, 15.0), pad(0.3, 1.5), f0(90, 300), amp(0.05, 0.6);
  for (int i = 0; i < 10; ++i) {
    const double d = dur(rng);
    auto a = concat({silence(pad(rng)), voiced(f0(rng), d, amp(rng)), silence(pad(rng))});
    add_noise(a, 0.001, static_cast<std::uint64_t>(i));
    EXPECT_NEAR(max_phonation_time(a), d, 0.1) << "case " << i;
  }
}

TEST(MaxPhonationTime, ClipThatIsAlmostAllVoice) {
  // Too few quiet frames to estimate a noise floor from.
  const auto a = concat({silence(0.2), voiced(140, 19.0, 0.3), silence(0.2)});
  EXPECT_NEAR(max_phonation_time(a), 19.0, 0.1);
  EXPECT_NEAR(max_phonation_time(voiced(140, 6.0, 0.3)), 6.0, 0.1);
}

TEST(MaxPhonationTime, SubAdditiveOverConcatenation) {
  // Joining two clips with a long silence can never create a longer run than the
  // longer of the two.
  const auto a = concat({silence(0.3), voiced(120, 2.5, 0.3), silence(0.3)});
  const auto b = concat({silence(0.3), voiced(200, 1.7, 0.2), silence(0.3)});
  const auto ab = concat({a, silence(1.0), b});
  EXPECT_LE(max_phonation_time(ab), std::max(max_phonation_time(a), max_phonation_time(b)) + 0.02);
}

TEST(MaxPhonationTime, InvariantToGain) {
  const auto a = concat({silence(0.5), voiced(130, 3.0, 0.4), silence(0.5)});
  auto b = a;
  for (auto& s : b.samples) s *= 0.2f;
  EXPECT_NEAR(max_phonation_time(a), max_phonation_time(b), 0.02);
}

// ---- measure ----

TEST(Measure, MetricFollowsPromptPart) {
  const auto rr = measure(breathing(12, 25, 10, 1), {PromptId::Breathing, 1});
  EXPECT_TRUE(rr.respiratory_rate_bpm);
  EXPECT_FALSE(rr.max_phonation_time_s);
  EXPECT_FALSE(rr.deep_breath_count);

  const auto mpt = measure(concat({silence(0.5), voiced(150, 3, 0.3), silence(0.5)}), {PromptId::Phonation, 1});
  EXPECT_TRUE(mpt.max_phonation_time_s);
  EXPECT_FALSE(mpt.respiratory_rate_bpm);

  const auto speech = measure(voiced(150, 3, 0.3), {PromptId::HealthBaseline, 1});
  EXPECT_FALSE(speech.respiratory_rate_bpm);
  EXPECT_FALSE(speech.max_phonation_time_s);
  EXPECT_FALSE(speech.deep_breath_count);
  EXPECT_LT(speech.rms_dbfs, 0.0);
}

TEST(Measure, TooShortLeavesMetricEmpty) {
  const auto m = measure(breathing(12, 4, 10, 1), {PromptId::Breathing, 1});
  EXPECT_FALSE(m.respiratory_rate_bpm);
}

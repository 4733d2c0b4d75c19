#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "voice_ehr/audio.hpp"
#include "voice_ehr/domain.hpp"

namespace voice_ehr {

/// Tunables for every signal metric. Defaults are the documented pipeline values;
/// deployments recalibrate by loading a different config, not by editing code.
struct AcousticConfig {
  // breathing envelope
  double envelope_rate_hz = 50.0;
  double envelope_cutoff_hz = 1.0;
  double min_breath_spacing_s = 1.5;
  double breath_prominence_sd = 0.25;
  double rr_min_duration_s = 10.0;
  double rr_min_bpm = 4.0;
  double rr_max_bpm = 60.0;
  double envelope_silence_floor = 1e-6;
  double rr_agreement_full_bpm = 1.0;
  double rr_agreement_zero_bpm = 6.0;

  // deep breaths
  double deep_breath_prominence_of_max = 0.5;
  double deep_breath_spacing_s = 2.0;
  double deep_breath_min_duration_s = 5.0;

  // phonation
  double frame_s = 0.025;
  double hop_s = 0.010;
  double voicing_floor_dbfs = -40.0;
  double noise_margin_db = 10.0;
  double noise_floor_percentile = 0.10;
  // The threshold never rises above this far below the loud frames, so a clip that is
  // almost all phonation (no quiet frames to estimate noise from) still counts as voiced.
  double loud_percentile = 0.95;
  double peak_headroom_db = 20.0;
  double voicing_min_correlation = 0.5;
  double f0_min_hz = 60.0;
  double f0_max_hz = 400.0;
  double bridge_gap_s = 0.150;
  double mpt_min_duration_s = 1.0;

  // level
  double clip_level = 0.999;
  double silence_dbfs = -120.0;
};

struct RespiratoryEstimate {
  std::optional<double> bpm;
  double confidence = 0.0;
  /// Estimate from the envelope autocorrelation alone (diagnostic).
  std::optional<double> autocorr_bpm;
  std::size_t peak_count = 0;
};

struct Peak {
  std::size_t index = 0;
  double value = 0.0;
  double prominence = 0.0;
};

/// Local maxima with topographic prominence >= min_prominence, thinned so no two
/// kept peaks are closer than min_distance samples (taller peak wins). Endpoints are
/// never peaks.
std::vector<Peak> find_peaks(std::span<const double> x, double min_prominence,
                             std::size_t min_distance);

/// Rectified signal averaged into envelope_rate_hz blocks, then a zero-phase
/// 2nd-order Butterworth low-pass at envelope_cutoff_hz.
std::vector<double> breath_envelope(const PcmAudio& audio, const AcousticConfig& cfg = {});

/// Breaths per minute from the nasal-breathing task. `window_s` > 0 limits the
/// analysis to the first window_s seconds. Throws TooShort below rr_min_duration_s.
RespiratoryEstimate respiratory_rate(const PcmAudio& audio, double window_s = 0.0,
                                     const AcousticConfig& cfg = {});

/// High-energy envelope events. Throws TooShort below 5 s.
int deep_breath_count(const PcmAudio& audio, const AcousticConfig& cfg = {});

/// Longest voiced run in seconds. Throws TooShort below 1 s.
double max_phonation_time(const PcmAudio& audio, const AcousticConfig& cfg = {});

/// 20*log10(RMS); digital silence reports cfg.silence_dbfs. Throws EmptySignal.
double rms_dbfs(std::span<const float> signal, double silence_dbfs = -120.0);
/// Fraction of samples with |x| >= clip_level. Throws EmptySignal.
double clipping_fraction(std::span<const float> signal, double clip_level = 0.999);

/// Leading + trailing run of 10 ms frames below `threshold_dbfs`.
double edge_silence_s(const PcmAudio& audio, double threshold_dbfs = -50.0);

/// Metrics applicable to the prompt part: RR on P5.1, deep breaths on P5.2, MPT on
/// P4.1; level statistics everywhere. Too-short recordings leave the metric empty.
AcousticMetrics measure(const PcmAudio& audio, PromptPart prompt, const AcousticConfig& cfg = {});

}  // namespace voice_ehr

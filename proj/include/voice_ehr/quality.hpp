#pragma once

#include "voice_ehr/acoustics.hpp"
#include "voice_ehr/audio.hpp"
#include "voice_ehr/domain.hpp"

namespace voice_ehr {

struct QualityConfig {
  double max_duration_grace_s = 10.0;
  double near_silence_dbfs = -45.0;
  double max_clipping_fraction = 0.05;
  double edge_silence_dbfs = -50.0;
  double clip_level = 0.999;
};

/// Duration bounds come from the prompt part: below min_duration_s is TooShort, above
/// max_duration_s + grace is TooLong.
QualityReport quality_gate(const PcmAudio& audio, const PartSpec& spec, const QualityConfig& cfg = {});
QualityReport quality_gate(const PcmAudio& audio, PromptPart prompt, const QualityConfig& cfg = {});

}  // namespace voice_ehr

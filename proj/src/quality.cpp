#include "voice_ehr/quality.hpp"

namespace voice_ehr {

QualityReport quality_gate(const PcmAudio& audio, const PartSpec& spec, const QualityConfig& cfg) {
  QualityReport q;
  q.duration_s = audio.duration_s();
  if (audio.samples.empty()) {
    q.rms_dbfs = -120.0;
    q.clipping_fraction = 0.0;
  } else {
    q.rms_dbfs = rms_dbfs(audio.samples);
    q.clipping_fraction = clipping_fraction(audio.samples, cfg.clip_level);
  }
  q.leading_trailing_silence_s = edge_silence_s(audio, cfg.edge_silence_dbfs);

  if (q.duration_s < spec.min_duration_s) q.reasons.push_back(QualityReason::TooShort);
  if (q.duration_s > spec.max_duration_s + cfg.max_duration_grace_s) q.reasons.push_back(QualityReason::TooLong);
  if (q.rms_dbfs < cfg.near_silence_dbfs) q.reasons.push_back(QualityReason::NearSilence);
  if (q.clipping_fraction > cfg.max_clipping_fraction) q.reasons.push_back(QualityReason::Clipping);
  q.passes = q.reasons.empty();
  return q;
}

QualityReport quality_gate(const PcmAudio& audio, PromptPart prompt, const QualityConfig& cfg) {
  return quality_gate(audio, prompt_spec(prompt.prompt).part(prompt.part), cfg);
}

}  // namespace voice_ehr

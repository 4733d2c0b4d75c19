#include "voice_ehr/acoustics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "voice_ehr/error.hpp"

namespace voice_ehr {

// ---------------------------------------------------------------------------
// Peak picking
// ---------------------------------------------------------------------------

std::vector<Peak> find_peaks(std::span<const double> x, double min_prominence,
                             std::size_t min_distance) {
  const std::size_t n = x.size();
  std::vector<Peak> candidates;
  if (n < 3) return candidates;

  for (std::size_t i = 1; i + 1 < n;) {
    if (x[i] > x[i - 1]) {
      // Plateaus report their midpoint.
      std::size_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;
      if (j + 1 < n && x[j + 1] < x[i]) candidates.push_back({(i + j) / 2, x[i], 0.0});
      i = j + 1;
    } else {
      ++i;
    }
  }

  for (auto& p : candidates) {
    double left_min = p.value;
    for (std::size_t k = p.index; k-- > 0;) {
      if (x[k] > p.value) break;
      left_min = std::min(left_min, x[k]);
    }
    double right_min = p.value;
    for (std::size_t k = p.index + 1; k < n; ++k) {
      if (x[k] > p.value) break;
      right_min = std::min(right_min, x[k]);
    }
    p.prominence = p.value - std::max(left_min, right_min);
  }
  std::erase_if(candidates, [&](const Peak& p) { return p.prominence < min_prominence; });

  if (min_distance > 1 && candidates.size() > 1) {
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return candidates[a].value > candidates[b].value;
    });
    std::vector<bool> keep(candidates.size(), true);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      const std::size_t i = order[oi];
      if (!keep[i]) continue;
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        if (j == i || !keep[j]) continue;
        const auto d = candidates[i].index > candidates[j].index
                           ? candidates[i].index - candidates[j].index
                           : candidates[j].index - candidates[i].index;
        if (d < min_distance) keep[j] = false;
      }
    }
    std::vector<Peak> kept;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (keep[i]) kept.push_back(candidates[i]);
    candidates = std::move(kept);
  }
  return candidates;
}

// ---------------------------------------------------------------------------
// Envelope
// ---------------------------------------------------------------------------

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  static Biquad butterworth_lowpass(double cutoff_hz, double fs) {
    const double k = std::tan(M_PI * std::min(cutoff_hz, 0.49 * fs) / fs);
    const double norm = 1.0 / (1.0 + std::sqrt(2.0) * k + k * k);
    Biquad f{};
    f.b0 = k * k * norm;
    f.b1 = 2.0 * f.b0;
    f.b2 = f.b0;
    f.a1 = 2.0 * (k * k - 1.0) * norm;
    f.a2 = (1.0 - std::sqrt(2.0) * k + k * k) * norm;
    return f;
  }

  // Transposed direct form II, state primed to the steady state of `x.front()`.
  void run(std::vector<double>& x) const {
    if (x.empty()) return;
    const double c = x.front();
    double z2 = (b2 - a2) * c;
    double z1 = (b1 + b2 - a1 - a2) * c;
    for (double& v : x) {
      const double in = v;
      const double y = b0 * in + z1;
      z1 = b1 * in - a1 * y + z2;
      z2 = b2 * in - a2 * y;
      v = y;
    }
  }
};

// Zero-phase filtering with odd extension at both ends.
std::vector<double> filtfilt(const Biquad& f, const std::vector<double>& x, std::size_t pad) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  pad = std::min(pad, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i > 0; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);
  f.run(ext);
  std::reverse(ext.begin(), ext.end());
  f.run(ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

void detrend(std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 2) return;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = static_cast<double>(i);
    sx += xi;
    sy += y[i];
    sxx += xi * xi;
    sxy += xi * y[i];
  }
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  const double slope = denom != 0.0 ? (dn * sxy - sx * sy) / denom : 0.0;
  const double icpt = (sy - slope * sx) / dn;
  for (std::size_t i = 0; i < n; ++i) y[i] -= icpt + slope * static_cast<double>(i);
}

double stddev(const std::vector<double>& y) {
  if (y.empty()) return 0.0;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double acc = 0.0;
  for (double v : y) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(y.size()));
}

std::size_t block_size(const PcmAudio& a, const AcousticConfig& cfg) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(a.sample_rate / cfg.envelope_rate_hz)));
}

double envelope_rate(const PcmAudio& a, const AcousticConfig& cfg) {
  return static_cast<double>(a.sample_rate) / static_cast<double>(block_size(a, cfg));
}

// Dominant period (seconds) from the biased autocorrelation of a zero-mean series,
// searched over [min_lag_s, max_lag_s]; the highest local maximum wins.
std::optional<double> autocorr_period(const std::vector<double>& y, double fs, double min_lag_s,
                                      double max_lag_s) {
  const std::size_t n = y.size();
  const auto lo = static_cast<std::size_t>(std::floor(min_lag_s * fs));
  const auto hi = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(max_lag_s * fs)), n > 2 ? n - 2 : 0);
  if (lo < 1 || hi <= lo + 1) return std::nullopt;
  std::vector<double> r(hi + 2, 0.0);
  for (std::size_t k = lo - 1; k <= hi + 1 && k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) acc += y[i] * y[i + k];
    r[k] = acc / static_cast<double>(n);
  }
  std::optional<std::size_t> best;
  for (std::size_t k = lo; k <= hi; ++k) {
    if (r[k] > 0.0 && r[k] > r[k - 1] && r[k] >= r[k + 1] && (!best || r[k] > r[*best])) best = k;
  }
  if (!best) return std::nullopt;
  const std::size_t k = *best;
  const double denom = r[k - 1] - 2.0 * r[k] + r[k + 1];
  const double shift = denom != 0.0 ? 0.5 * (r[k - 1] - r[k + 1]) / denom : 0.0;
  return (static_cast<double>(k) + std::clamp(shift, -0.5, 0.5)) / fs;
}

PcmAudio head(const PcmAudio& a, double seconds) {
  if (seconds <= 0.0) return a;
  PcmAudio out;
  out.sample_rate = a.sample_rate;
  const auto n = std::min(a.samples.size(), static_cast<std::size_t>(seconds * a.sample_rate));
  out.samples.assign(a.samples.begin(), a.samples.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace

std::vector<double> breath_envelope(const PcmAudio& audio, const AcousticConfig& cfg) {
  const std::size_t block = block_size(audio, cfg);
  const std::size_t blocks = audio.samples.size() / block;
  std::vector<double> env(blocks, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    double acc = 0.0;
    for (std::size_t i = b * block; i < (b + 1) * block; ++i) acc += std::abs(audio.samples[i]);
    env[b] = acc / static_cast<double>(block);
  }
  const double fs = envelope_rate(audio, cfg);
  const auto lp = Biquad::butterworth_lowpass(cfg.envelope_cutoff_hz, fs);
  return filtfilt(lp, env, static_cast<std::size_t>(std::lround(2.0 * fs)));
}

RespiratoryEstimate respiratory_rate(const PcmAudio& full, double window_s, const AcousticConfig& cfg) {
  const PcmAudio audio = head(full, window_s);
  if (audio.duration_s() < cfg.rr_min_duration_s)
    fail(ErrorCode::TooShort, "respiratory rate needs >= " + std::to_string(cfg.rr_min_duration_s) + " s");

  RespiratoryEstimate est;
  std::vector<double> env = breath_envelope(audio, cfg);
  const double fs = envelope_rate(audio, cfg);
  const double raw_peak = env.empty() ? 0.0 : *std::max_element(env.begin(), env.end());
  detrend(env);
  const double sd = stddev(env);
  if (raw_peak <= cfg.envelope_silence_floor || sd <= cfg.envelope_silence_floor * 0.1) return est;

  const auto min_dist = static_cast<std::size_t>(std::lround(cfg.min_breath_spacing_s * fs));
  const auto peaks = find_peaks(env, cfg.breath_prominence_sd * sd, min_dist);
  est.peak_count = peaks.size();

  std::optional<double> bpm;
  if (peaks.size() >= 2) {
    const double span_s = static_cast<double>(peaks.back().index - peaks.front().index) / fs;
    bpm = 60.0 * static_cast<double>(peaks.size() - 1) / span_s;
  } else if (peaks.size() == 1) {
    bpm = 60.0 / audio.duration_s();
  }

  const auto period = autocorr_period(env, fs, 60.0 / cfg.rr_max_bpm,
                                      std::min(60.0 / cfg.rr_min_bpm, audio.duration_s() * 0.6));
  if (period) est.autocorr_bpm = 60.0 / *period;

  if (!bpm || *bpm < cfg.rr_min_bpm || *bpm > cfg.rr_max_bpm) return est;
  est.bpm = bpm;
  if (est.autocorr_bpm) {
    const double d = std::abs(*bpm - *est.autocorr_bpm);
    const double full_at = cfg.rr_agreement_full_bpm;
    const double zero_at = cfg.rr_agreement_zero_bpm;
    est.confidence = d <= full_at ? 1.0 : d >= zero_at ? 0.0 : (zero_at - d) / (zero_at - full_at);
  }
  return est;
}

int deep_breath_count(const PcmAudio& audio, const AcousticConfig& cfg) {
  if (audio.duration_s() < cfg.deep_breath_min_duration_s)
    fail(ErrorCode::TooShort, "deep breath count needs >= " + std::to_string(cfg.deep_breath_min_duration_s) + " s");
  std::vector<double> env = breath_envelope(audio, cfg);
  if (env.empty()) return 0;
  const double fs = envelope_rate(audio, cfg);
  const auto [mn, mx] = std::minmax_element(env.begin(), env.end());
  const double lo = *mn;
  const double hi = *mx;
  if (hi <= cfg.envelope_silence_floor) return 0;
  // Bursts touching either end of the clip still count as events.
  env.insert(env.begin(), lo);
  env.push_back(lo);
  const auto peaks = find_peaks(env, cfg.deep_breath_prominence_of_max * hi,
                                static_cast<std::size_t>(std::lround(cfg.deep_breath_spacing_s * fs)));
  return static_cast<int>(peaks.size());
}

double max_phonation_time(const PcmAudio& audio, const AcousticConfig& cfg) {
  if (audio.duration_s() < cfg.mpt_min_duration_s)
    fail(ErrorCode::TooShort, "phonation analysis needs >= " + std::to_string(cfg.mpt_min_duration_s) + " s");
  const double fs = audio.sample_rate;
  const auto frame = static_cast<std::size_t>(std::lround(cfg.frame_s * fs));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_s * fs));
  const auto& x = audio.samples;
  if (x.size() < frame || hop == 0) return 0.0;
  const std::size_t frames = 1 + (x.size() - frame) / hop;

  std::vector<double> level(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t i = f * hop; i < f * hop + frame; ++i) acc += double(x[i]) * x[i];
    const double rms = std::sqrt(acc / static_cast<double>(frame));
    level[f] = rms > 0.0 ? std::max(20.0 * std::log10(rms), cfg.silence_dbfs) : cfg.silence_dbfs;
  }
  std::vector<double> sorted = level;
  std::sort(sorted.begin(), sorted.end());
  auto percentile = [&](double q) { return sorted[static_cast<std::size_t>(q * static_cast<double>(frames - 1))]; };
  const double threshold =
      std::max(cfg.voicing_floor_dbfs, std::min(percentile(cfg.noise_floor_percentile) + cfg.noise_margin_db,
                                                percentile(cfg.loud_percentile) - cfg.peak_headroom_db));

  const auto min_lag = static_cast<std::size_t>(std::floor(fs / cfg.f0_max_hz));
  const auto max_lag = std::min(frame - 1, static_cast<std::size_t>(std::ceil(fs / cfg.f0_min_hz)));

  std::vector<bool> voiced(frames, false);
  for (std::size_t f = 0; f < frames; ++f) {
    if (level[f] <= threshold) continue;
    const float* w = x.data() + f * hop;
    double best = 0.0;
    for (std::size_t k = min_lag; k <= max_lag; ++k) {
      double num = 0.0, e0 = 0.0, e1 = 0.0;
      for (std::size_t i = 0; i + k < frame; ++i) {
        num += double(w[i]) * w[i + k];
        e0 += double(w[i]) * w[i];
        e1 += double(w[i + k]) * w[i + k];
      }
      if (e0 > 0.0 && e1 > 0.0) best = std::max(best, num / std::sqrt(e0 * e1));
    }
    voiced[f] = best >= cfg.voicing_min_correlation;
  }

  const auto bridge = static_cast<std::size_t>(std::lround(cfg.bridge_gap_s / cfg.hop_s));
  double longest = 0.0;
  std::size_t f = 0;
  while (f < frames) {
    if (!voiced[f]) {
      ++f;
      continue;
    }
    const std::size_t start = f;
    std::size_t last = f;
    std::size_t gap = 0;
    for (++f; f < frames; ++f) {
      if (voiced[f]) {
        last = f;
        gap = 0;
      } else if (++gap > bridge) {
        break;
      }
    }
    f = last + 1;
    const double run = static_cast<double>(last - start) * cfg.hop_s + cfg.hop_s;
    longest = std::max(longest, run);
  }
  return std::min(longest, audio.duration_s());
}

double rms_dbfs(std::span<const float> signal, double silence_dbfs) {
  if (signal.empty()) fail(ErrorCode::EmptySignal);
  double acc = 0.0;
  for (float v : signal) acc += double(v) * v;
  const double rms = std::sqrt(acc / static_cast<double>(signal.size()));
  if (rms <= 0.0) return silence_dbfs;
  return std::max(20.0 * std::log10(rms), silence_dbfs);
}

double clipping_fraction(std::span<const float> signal, double clip_level) {
  if (signal.empty()) fail(ErrorCode::EmptySignal);
  const auto clipped = std::count_if(signal.begin(), signal.end(),
                                     [&](float v) { return std::abs(v) >= clip_level; });
  return static_cast<double>(clipped) / static_cast<double>(signal.size());
}

double edge_silence_s(const PcmAudio& audio, double threshold_dbfs) {
  const auto frame = static_cast<std::size_t>(std::max(1, audio.sample_rate / 100));
  const std::size_t frames = audio.samples.size() / frame;
  if (frames == 0) return audio.duration_s();
  auto quiet = [&](std::size_t f) {
    return rms_dbfs(std::span<const float>(audio.samples.data() + f * frame, frame)) < threshold_dbfs;
  };
  std::size_t lead = 0;
  while (lead < frames && quiet(lead)) ++lead;
  if (lead == frames) return audio.duration_s();
  std::size_t trail = 0;
  while (trail < frames && quiet(frames - 1 - trail)) ++trail;
  return static_cast<double>(lead + trail) * static_cast<double>(frame) / audio.sample_rate;
}

AcousticMetrics measure(const PcmAudio& audio, PromptPart prompt, const AcousticConfig& cfg) {
  AcousticMetrics m;
  if (audio.samples.empty()) {
    m.rms_dbfs = cfg.silence_dbfs;
    return m;
  }
  m.rms_dbfs = rms_dbfs(audio.samples, cfg.silence_dbfs);
  m.clipping_fraction = clipping_fraction(audio.samples, cfg.clip_level);
  const double dur = audio.duration_s();
  if (prompt == PromptPart{PromptId::Breathing, 1} && dur >= cfg.rr_min_duration_s) {
    const auto rr = respiratory_rate(audio, 0.0, cfg);
    m.respiratory_rate_bpm = rr.bpm;
    m.rr_confidence = rr.confidence;
  }
  if (prompt == PromptPart{PromptId::Breathing, 2} && dur >= cfg.deep_breath_min_duration_s)
    m.deep_breath_count = deep_breath_count(audio, cfg);
  if (prompt == PromptPart{PromptId::Phonation, 1} && dur >= cfg.mpt_min_duration_s)
    m.max_phonation_time_s = max_phonation_time(audio, cfg);
  return m;
}

}  // namespace voice_ehr

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace voice_ehr {

inline constexpr int kCanonicalSampleRate = 16000;

/// Mono floating-point audio, full scale = 1.0.
struct PcmAudio {
  std::vector<float> samples;
  int sample_rate = kCanonicalSampleRate;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class ContainerFormat { Wav, WebM, Ogg, Mp4, Unknown };

std::string_view container_name(ContainerFormat f);

/// MIME type accepted by begin_upload, or nullopt (UnsupportedFormat).
std::optional<ContainerFormat> container_for_content_type(std::string_view content_type);

/// Identifies the container from its magic bytes.
ContainerFormat sniff_container(std::span<const std::uint8_t> bytes);

/// RIFF/WAVE: integer PCM 8/16/24/32 bit, IEEE float 32/64 bit, WAVE_FORMAT_EXTENSIBLE.
/// Multi-channel input is averaged to mono. Throws DecodeFailure.
PcmAudio decode_wav(std::span<const std::uint8_t> bytes);

/// 16-bit PCM mono WAV.
std::vector<std::uint8_t> encode_wav(const PcmAudio& audio);

/// Band-limited rational resampler (windowed sinc, polyphase).
PcmAudio resample(const PcmAudio& audio, int target_rate);

/// Canonical 16 kHz, 16-bit mono representation.
std::vector<std::int16_t> to_canonical_pcm16(const PcmAudio& audio);
PcmAudio from_pcm16(std::span<const std::int16_t> samples, int sample_rate = kCanonicalSampleRate);
std::vector<std::uint8_t> pcm16_le_bytes(std::span<const std::int16_t> samples);
std::vector<std::int16_t> pcm16_from_le_bytes(std::span<const std::uint8_t> bytes);

/// Turns an uploaded container into mono PCM. WAV is decoded in-process; other
/// containers go through an external ffmpeg binary when one is available.
class AudioDecoder {
 public:
  /// Empty path means "look for ffmpeg on PATH".
  explicit AudioDecoder(std::string ffmpeg_path = {});

  PcmAudio decode(std::span<const std::uint8_t> bytes, ContainerFormat format) const;
  bool has_external_decoder() const { return !ffmpeg_.empty(); }

 private:
  std::string ffmpeg_;
};

}  // namespace voice_ehr

#include "voice_ehr/audio.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "voice_ehr/error.hpp"

namespace voice_ehr {

std::string_view container_name(ContainerFormat f) {
  switch (f) {
    case ContainerFormat::Wav: return "wav";
    case ContainerFormat::WebM: return "webm";
    case ContainerFormat::Ogg: return "ogg";
    case ContainerFormat::Mp4: return "mp4";
    case ContainerFormat::Unknown: break;
  }
  return "unknown";
}

std::optional<ContainerFormat> container_for_content_type(std::string_view ct) {
  // Parameters such as ";codecs=opus" are ignored.
  const auto semi = ct.find(';');
  std::string base(ct.substr(0, semi));
  while (!base.empty() && base.back() == ' ') base.pop_back();
  std::transform(base.begin(), base.end(), base.begin(), [](unsigned char c) { return std::tolower(c); });
  if (base == "audio/wav" || base == "audio/x-wav" || base == "audio/wave" || base == "audio/vnd.wave")
    return ContainerFormat::Wav;
  if (base == "audio/webm" || base == "video/webm") return ContainerFormat::WebM;
  if (base == "audio/ogg" || base == "audio/opus") return ContainerFormat::Ogg;
  if (base == "audio/mp4" || base == "audio/aac" || base == "audio/x-m4a" || base == "audio/m4a")
    return ContainerFormat::Mp4;
  return std::nullopt;
}

ContainerFormat sniff_container(std::span<const std::uint8_t> b) {
  auto at = [&](size_t off, const char* magic) {
    const size_t n = std::strlen(magic);
    return b.size() >= off + n && std::memcmp(b.data() + off, magic, n) == 0;
  };
  if (at(0, "RIFF") && at(8, "WAVE")) return ContainerFormat::Wav;
  if (at(0, "OggS")) return ContainerFormat::Ogg;
  if (b.size() >= 4 && b[0] == 0x1A && b[1] == 0x45 && b[2] == 0xDF && b[3] == 0xA3)
    return ContainerFormat::WebM;
  if (at(4, "ftyp")) return ContainerFormat::Mp4;
  return ContainerFormat::Unknown;
}

// ---------------------------------------------------------------------------
// WAV
// ---------------------------------------------------------------------------

namespace {

// Same 2^15 scale as the decoder, so 16-bit input survives a decode/encode cycle bit-exactly.
std::int16_t quantize16(float x) {
  return static_cast<std::int16_t>(std::clamp<long>(std::lround(static_cast<double>(x) * 32768.0), -32768, 32767));
}

std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const std::uint8_t* p) { return std::uint16_t(p[0] | p[1] << 8); }

void put32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}
void put16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}

}  // namespace

PcmAudio decode_wav(std::span<const std::uint8_t> b) {
  if (sniff_container(b) != ContainerFormat::Wav) fail(ErrorCode::DecodeFailure, "not a RIFF/WAVE file");
  size_t pos = 12;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  size_t data_len = 0;
  while (pos + 8 <= b.size()) {
    const std::uint8_t* hdr = b.data() + pos;
    const std::uint32_t len = le32(hdr + 4);
    const size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16 || body + 16 > b.size()) fail(ErrorCode::DecodeFailure, "short fmt chunk");
      format = le16(b.data() + body);
      channels = le16(b.data() + body + 2);
      rate = le32(b.data() + body + 4);
      bits = le16(b.data() + body + 14);
      if (format == 0xFFFE) {
        if (len < 40 || body + 26 > b.size()) fail(ErrorCode::DecodeFailure, "short extensible fmt");
        format = le16(b.data() + body + 24);
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = b.data() + body;
      // Streaming recorders leave the size at 0 or 0xFFFFFFFF.
      data_len = std::min<size_t>(len == 0 ? b.size() - body : len, b.size() - body);
      break;
    }
    pos = body + len + (len & 1);
  }
  if (!data) fail(ErrorCode::DecodeFailure, "no data chunk");
  if (channels == 0 || rate == 0) fail(ErrorCode::DecodeFailure, "missing or invalid fmt chunk");
  const bool is_float = format == 3;
  if (!(format == 1 || is_float)) fail(ErrorCode::DecodeFailure, "unsupported WAV format tag " + std::to_string(format));
  if (is_float ? !(bits == 32 || bits == 64) : !(bits == 8 || bits == 16 || bits == 24 || bits == 32))
    fail(ErrorCode::DecodeFailure, "unsupported bit depth " + std::to_string(bits));

  const size_t bytes_per = bits / 8;
  const size_t frame = bytes_per * channels;
  const size_t frames = data_len / frame;
  PcmAudio out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + i * frame + c * bytes_per;
      double v = 0.0;
      if (is_float) {
        if (bits == 32) {
          float f;
          std::uint32_t u = le32(p);
          std::memcpy(&f, &u, 4);
          v = f;
        } else {
          std::uint64_t u = std::uint64_t(le32(p)) | std::uint64_t(le32(p + 4)) << 32;
          double d;
          std::memcpy(&d, &u, 8);
          v = d;
        }
      } else if (bits == 8) {
        v = (static_cast<int>(p[0]) - 128) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = std::int32_t(p[0]) | std::int32_t(p[1]) << 8 | std::int32_t(p[2]) << 16;
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(le32(p)) / 2147483648.0;
      }
      acc += v;
    }
    out.samples[i] = static_cast<float>(acc / channels);
  }
  return out;
}

std::vector<std::uint8_t> encode_wav(const PcmAudio& audio) {
  std::vector<std::int16_t> pcm(audio.samples.size());
  for (size_t i = 0; i < pcm.size(); ++i) pcm[i] = quantize16(audio.samples[i]);
  std::vector<std::uint8_t> out;
  const std::uint32_t data_len = static_cast<std::uint32_t>(pcm.size() * 2);
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_len);
  for (auto s : pcm) put16(out, static_cast<std::uint16_t>(s));
  return out;
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

PcmAudio resample(const PcmAudio& in, int target_rate) {
  if (in.sample_rate <= 0 || target_rate <= 0) fail(ErrorCode::DecodeFailure, "invalid sample rate");
  if (in.sample_rate == target_rate) return in;

  const long g = std::gcd(static_cast<long>(in.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g;    // L
  const long down = in.sample_rate / g;  // M
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * 0.95;
  constexpr int kZeroCrossings = 16;
  const int half = static_cast<int>(std::ceil(kZeroCrossings / cutoff));

  // table[phase][k], k indexes input offsets -half+1 .. half
  const int taps = 2 * half;
  std::vector<float> table(static_cast<size_t>(up) * taps);
  for (long ph = 0; ph < up; ++ph) {
    const double frac = static_cast<double>(ph) / static_cast<double>(up);
    double sum = 0.0;
    for (int k = 0; k < taps; ++k) {
      const double x = (k - half + 1) - frac;
      const double arg = M_PI * cutoff * x;
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double w_pos = (x + half) / (2.0 * half);
      const double window = (w_pos <= 0.0 || w_pos >= 1.0)
                                ? 0.0
                                : 0.42 - 0.5 * std::cos(2 * M_PI * w_pos) + 0.08 * std::cos(4 * M_PI * w_pos);
      const double h = cutoff * sinc * window;
      table[static_cast<size_t>(ph) * taps + k] = static_cast<float>(h);
      sum += h;
    }
    if (sum != 0.0)
      for (int k = 0; k < taps; ++k) table[static_cast<size_t>(ph) * taps + k] /= static_cast<float>(sum);
  }

  const auto n_in = static_cast<long long>(in.samples.size());
  const auto n_out = static_cast<long long>(std::llround(static_cast<double>(n_in) * up / down));
  PcmAudio out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<size_t>(n_out));
  for (long long n = 0; n < n_out; ++n) {
    const long long pos = n * down;
    const long long base = pos / up;
    const long ph = static_cast<long>(pos % up);
    const float* h = &table[static_cast<size_t>(ph) * taps];
    double acc = 0.0;
    const long long first = base - half + 1;
    const int k0 = static_cast<int>(std::max<long long>(0, -first));
    const int k1 = static_cast<int>(std::min<long long>(taps, n_in - first));
    for (int k = k0; k < k1; ++k) acc += h[k] * in.samples[static_cast<size_t>(first + k)];
    out.samples[static_cast<size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

std::vector<std::int16_t> to_canonical_pcm16(const PcmAudio& audio) {
  const PcmAudio a = resample(audio, kCanonicalSampleRate);
  std::vector<std::int16_t> out(a.samples.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = quantize16(a.samples[i]);
  return out;
}

PcmAudio from_pcm16(std::span<const std::int16_t> samples, int sample_rate) {
  PcmAudio a;
  a.sample_rate = sample_rate;
  a.samples.resize(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) a.samples[i] = samples[i] / 32768.0f;
  return a;
}

std::vector<std::uint8_t> pcm16_le_bytes(std::span<const std::int16_t> samples) {
  std::vector<std::uint8_t> out(samples.size() * 2);
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(samples[i]);
    out[2 * i] = static_cast<std::uint8_t>(u);
    out[2 * i + 1] = static_cast<std::uint8_t>(u >> 8);
  }
  return out;
}

std::vector<std::int16_t> pcm16_from_le_bytes(std::span<const std::uint8_t> bytes) {
  std::vector<std::int16_t> out(bytes.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::int16_t>(le16(bytes.data() + 2 * i));
  return out;
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

namespace {

std::string find_on_path(const char* name) {
  const char* path = std::getenv("PATH");
  if (!path) return {};
  std::string_view rest(path);
  while (!rest.empty()) {
    const auto colon = rest.find(':');
    const std::filesystem::path candidate = std::filesystem::path(rest.substr(0, colon)) / name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate.string();
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return {};
}

}  // namespace

AudioDecoder::AudioDecoder(std::string ffmpeg_path)
    : ffmpeg_(ffmpeg_path.empty() ? find_on_path("ffmpeg") : std::move(ffmpeg_path)) {}

PcmAudio AudioDecoder::decode(std::span<const std::uint8_t> bytes, ContainerFormat format) const {
  const auto sniffed = sniff_container(bytes);
  if (format == ContainerFormat::Wav || sniffed == ContainerFormat::Wav) return decode_wav(bytes);
  if (ffmpeg_.empty())
    fail(ErrorCode::DecodeFailure,
         "no decoder available for " + std::string(container_name(format)) + " (ffmpeg not found)");

  namespace fs = std::filesystem;
  char tmpl[] = "/tmp/voice_ehr_decode_XXXXXX";
  const char* dir = ::mkdtemp(tmpl);
  if (!dir) fail(ErrorCode::IoFailure, "mkdtemp");
  const fs::path in_path = fs::path(dir) / "input";
  const fs::path out_path = fs::path(dir) / "output.raw";
  {
    std::ofstream f(in_path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  const std::string cmd = "'" + ffmpeg_ + "' -nostdin -v error -y -i '" + in_path.string() +
                          "' -f s16le -ac 1 -ar " + std::to_string(kCanonicalSampleRate) + " '" +
                          out_path.string() + "'";
  const int rc = std::system(cmd.c_str());
  std::vector<std::uint8_t> raw;
  if (rc == 0) {
    std::ifstream f(out_path, std::ios::binary);
    raw.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  if (rc != 0) fail(ErrorCode::DecodeFailure, "ffmpeg could not decode " + std::string(container_name(format)));
  const auto pcm = pcm16_from_le_bytes(raw);
  return from_pcm16(pcm, kCanonicalSampleRate);
}

}  // namespace voice_ehr

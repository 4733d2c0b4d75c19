#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "voice_ehr/acoustics.hpp"
#include "voice_ehr/audio.hpp"
#include "voice_ehr/error.hpp"
#include "voice_ehr/hash.hpp"

using namespace voice_ehr;
using namespace voice_ehr::testing;

namespace {

void put16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(x & 0xFF);
  v.push_back(x >> 8);
}
void put32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back((x >> (8 * i)) & 0xFF);
}

// Hand-built RIFF header around raw sample bytes.
std::vector<std::uint8_t> riff(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                               const std::vector<std::uint8_t>& data, bool extensible = false) {
  std::vector<std::uint8_t> v{'R', 'I', 'F', 'F'};
  put32(v, 0);
  v.insert(v.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(v, extensible ? 40 : 16);
  put16(v, extensible ? 0xFFFE : format);
  put16(v, channels);
  put32(v, rate);
  put32(v, rate * channels * bits / 8);
  put16(v, static_cast<std::uint16_t>(channels * bits / 8));
  put16(v, bits);
  if (extensible) {
    put16(v, 22);
    put16(v, bits);
    put32(v, 0);
    put16(v, format);
    for (int i = 0; i < 14; ++i) v.push_back(0);
  }
  v.insert(v.end(), {'L', 'I', 'S', 'T'});  // an unrelated chunk must be skipped
  put32(v, 3);
  v.insert(v.end(), {'a', 'b', 'c', 0});
  v.insert(v.end(), {'d', 'a', 't', 'a'});
  put32(v, static_cast<std::uint32_t>(data.size()));
  v.insert(v.end(), data.begin(), data.end());
  return v;
}

}  // namespace

TEST(Sniff, RecognisesContainers) {
  EXPECT_EQ(sniff_container(encode_wav(sine(440, 0.1, 0.5))), ContainerFormat::Wav);
  const std::vector<std::uint8_t> ogg{'O', 'g', 'g', 'S', 0, 2};
  EXPECT_EQ(sniff_container(ogg), ContainerFormat::Ogg);
  const std::vector<std::uint8_t> webm{0x1A, 0x45, 0xDF, 0xA3, 0};
  EXPECT_EQ(sniff_container(webm), ContainerFormat::WebM);
  const std::vector<std::uint8_t> mp4{0, 0, 0, 0x20, 'f', 't', 'y', 'p', 'M', '4', 'A'};
  EXPECT_EQ(sniff_container(mp4), ContainerFormat::Mp4);
  const std::vector<std::uint8_t> junk{1, 2, 3};
  EXPECT_EQ(sniff_container(junk), ContainerFormat::Unknown);
}

TEST(ContentType, MapsMimeTypes) {
  EXPECT_EQ(container_for_content_type("audio/wav"), ContainerFormat::Wav);
  EXPECT_EQ(container_for_content_type("audio/webm;codecs=opus"), ContainerFormat::WebM);
  EXPECT_EQ(container_for_content_type("audio/MP4"), ContainerFormat::Mp4);
  EXPECT_EQ(container_for_content_type("audio/ogg"), ContainerFormat::Ogg);
  EXPECT_FALSE(container_for_content_type("text/plain"));
}

TEST(Wav, SixteenBitRoundTripIsExact) {
  auto a = white_noise(0.5, 0.3, 1);
  const auto pcm = to_canonical_pcm16(a);
  const auto back = decode_wav(encode_wav(from_pcm16(pcm)));
  EXPECT_EQ(to_canonical_pcm16(back), pcm);
}

TEST(Wav, DecodesEveryDepth) {
  // 0.5 full scale in every integer and float encoding.
  std::vector<std::uint8_t> d8{192}, d16, d24{0, 0, 0x40}, d32, f32, f64;
  put16(d16, 0x4000);
  put32(d32, 0x40000000u);
  float f = 0.5f;
  std::uint32_t fu;
  std::memcpy(&fu, &f, 4);
  put32(f32, fu);
  double dd = 0.5;
  std::uint64_t du;
  std::memcpy(&du, &dd, 8);
  put32(f64, static_cast<std::uint32_t>(du));
  put32(f64, static_cast<std::uint32_t>(du >> 32));
  for (const auto& [fmt, bits, data] : std::vector<std::tuple<int, int, std::vector<std::uint8_t>>>{
           {1, 8, d8}, {1, 16, d16}, {1, 24, d24}, {1, 32, d32}, {3, 32, f32}, {3, 64, f64}}) {
    const auto a = decode_wav(riff(static_cast<std::uint16_t>(fmt), 1, 8000, static_cast<std::uint16_t>(bits), data));
    ASSERT_EQ(a.samples.size(), 1u) << bits;
    EXPECT_NEAR(a.samples[0], 0.5, 1e-6) << "format " << fmt << " bits " << bits;
    EXPECT_EQ(a.sample_rate, 8000);
  }
}

TEST(Wav, ExtensibleAndStereoAreAveraged) {
  std::vector<std::uint8_t> data;
  put16(data, 0x4000);  // L = 0.5
  put16(data, 0x0000);  // R = 0
  const auto a = decode_wav(riff(1, 2, 16000, 16, data, true));
  ASSERT_EQ(a.samples.size(), 1u);
  EXPECT_NEAR(a.samples[0], 0.25, 1e-6);
}

TEST(Wav, MalformedInputIsDecodeFailure) {
  const std::vector<std::uint8_t> junk(64, 7);
  try {
    decode_wav(junk);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DecodeFailure);
  }
  auto adpcm = riff(2, 1, 8000, 4, {0, 0});
  EXPECT_THROW(decode_wav(adpcm), Error);
}

TEST(Resample, PreservesToneLevelAndDuration) {
  for (int rate : {8000, 22050, 44100, 48000}) {
    const auto in = sine(440, 2.0, 0.5, rate);
    const auto out = resample(in, kCanonicalSampleRate);
    EXPECT_EQ(out.sample_rate, kCanonicalSampleRate);
    EXPECT_NEAR(out.duration_s(), 2.0, 1e-3) << rate;
    // Skip the filter edges when comparing level.
    std::span<const float> mid(out.samples.data() + 1600, out.samples.size() - 3200);
    EXPECT_NEAR(rms_dbfs(mid), rms_dbfs(in.samples), 0.1) << rate;
  }
}

TEST(Resample, RemovesContentAboveNyquist) {
  const auto in = sine(12000, 1.0, 0.5, 48000);
  const auto out = resample(in, kCanonicalSampleRate);
  std::span<const float> mid(out.samples.data() + 1600, out.samples.size() - 3200);
  EXPECT_LT(rms_dbfs(mid), -40.0);
}

TEST(Resample, SameRateIsIdentity) {
  const auto in = white_noise(0.2, 0.3, 2);
  EXPECT_EQ(resample(in, kCanonicalSampleRate).samples, in.samples);
}

TEST(Canonical, ChecksumIgnoresContainerDetails) {
  // The same 16 kHz content wrapped with an extra chunk hashes identically once decoded.
  const auto a = voiced(150, 0.5, 0.3);
  const auto pcm = to_canonical_pcm16(a);
  std::vector<std::uint8_t> raw;
  for (auto s : pcm) put16(raw, static_cast<std::uint16_t>(s));
  const auto wrapped = riff(1, 1, 16000, 16, raw);
  EXPECT_EQ(wav_checksum(wrapped), wav_checksum(encode_wav(a)));
  EXPECT_EQ(wav_checksum(wrapped), sha256_hex(pcm16_le_bytes(pcm)));
}

TEST(Pcm16, LittleEndianBytesRoundTrip) {
  const std::vector<std::int16_t> s{0, 1, -1, 32767, -32768, 1234};
  EXPECT_EQ(pcm16_from_le_bytes(pcm16_le_bytes(s)), s);
  const auto b = pcm16_le_bytes(s);
  EXPECT_EQ(b[2], 1);
  EXPECT_EQ(b[3], 0);
}

TEST(Decoder, NonWavWithoutFfmpegIsDecodeFailure) {
  AudioDecoder dec("/nonexistent/ffmpeg");
  const std::vector<std::uint8_t> ogg{'O', 'g', 'g', 'S', 0, 2, 0, 0};
  EXPECT_THROW(dec.decode(ogg, ContainerFormat::Ogg), Error);
  EXPECT_EQ(dec.decode(encode_wav(sine(300, 0.1, 0.2)), ContainerFormat::Wav).samples.size(), 1600u);
}

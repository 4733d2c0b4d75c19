#pragma once

#include <chrono>
#include <string>

#include "voice_ehr/transcription.hpp"

namespace voice_ehr {

struct AsrHttpConfig {
  /// Base URL; the engine serves GET <base>/capabilities and POST <base>/transcribe.
  std::string endpoint;
  /// Environment variable holding the bearer token (unset: no Authorization header).
  std::string token_env = "VOICE_EHR_ASR_TOKEN";
  std::chrono::seconds timeout{120};
};

/// Sends canonical audio as a 16-bit WAV body and expects {"text", "engine_tag"} back.
/// Transport errors and non-2xx replies surface as AsrUnavailable.
class AsrHttpClient : public AsrClient {
 public:
  explicit AsrHttpClient(AsrHttpConfig config);

  AsrCapabilities capabilities() override;
  std::string transcribe(const AsrRequest& request) override;

 private:
  AsrHttpConfig config_;
};

}  // namespace voice_ehr

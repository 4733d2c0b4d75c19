#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <string>

#include "voice_ehr/eval.hpp"

namespace voice_ehr {

struct LlmHttpConfig {
  /// Chat-completions URL, e.g. http://localhost:8000/v1/chat/completions.
  std::string endpoint;
  std::string model = "gpt-4o";
  std::string token_env = "VOICE_EHR_LLM_TOKEN";
  std::chrono::seconds timeout{120};
  /// Every request/response pair is appended here as one JSON line (empty: no audit).
  std::filesystem::path audit_log;
};

/// OpenAI-style chat client with temperature pinned to 0.
class LlmHttpClient : public LlmClient {
 public:
  explicit LlmHttpClient(LlmHttpConfig config);

  std::string model_tag() const override { return config_.model; }
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  LlmHttpConfig config_;
  std::mutex audit_mu_;
};

}  // namespace voice_ehr

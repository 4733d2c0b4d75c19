#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "voice_ehr/blob_store.hpp"
#include "voice_ehr/error.hpp"
#include "voice_ehr/eval.hpp"
#include "voice_ehr/session_store.hpp"
#include "voice_ehr/tokens.hpp"
#include "voice_ehr/transcription.hpp"
#include "voice_ehr/upload.hpp"

namespace voice_ehr {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "voice_ehr_data";
  std::string asr_endpoint;
  std::string llm_endpoint;
  std::string llm_model = "gpt-4o";
  std::string token_secret;
  std::uint64_t max_upload_bytes = 64ull * 1024 * 1024;
  std::string ffmpeg_path;
  int transcription_concurrency = 4;
  int eval_concurrency = 2;

  /// Optional JSON file (same keys as the fields), then VOICE_EHR_* environment
  /// overrides: LISTEN (host:port), DATA_DIR, ASR_ENDPOINT, LLM_ENDPOINT, LLM_MODEL,
  /// TOKEN_SECRET, MAX_UPLOAD_BYTES, FFMPEG.
  static ServiceConfig load(const std::optional<std::filesystem::path>& file = std::nullopt);
};

/// Transport-neutral request; the HTTP server and the tests both go through handle().
struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lowercase names
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

int http_status(ErrorCode code);

class Service {
 public:
  /// Null clients fall back to HTTP clients built from the config endpoints (or none).
  explicit Service(ServiceConfig config, std::unique_ptr<AsrClient> asr = nullptr,
                   std::unique_ptr<LlmClient> llm = nullptr, Clock clock = system_clock());
  ~Service();

  ApiResponse handle(const ApiRequest& request);

  /// Blocks serving HTTP until stop(). port 0 binds an ephemeral port.
  void serve();
  void stop();
  /// Port actually bound once serve() is listening (0 before).
  int bound_port() const { return bound_port_.load(); }

  std::string admin_token() const;

  SessionStore& sessions() { return sessions_; }
  BlobStore& blobs() { return blobs_; }
  UploadManager& uploads() { return uploads_; }
  const ServiceConfig& config() const { return config_; }

 private:
  struct Impl;

  ServiceConfig config_;
  Clock clock_;
  BlobStore blobs_;
  SessionStore sessions_;
  UploadManager uploads_;
  std::unique_ptr<AsrClient> asr_;
  std::unique_ptr<LlmClient> llm_;
  std::unique_ptr<Impl> impl_;
  std::atomic<int> bound_port_{0};
};

}  // namespace voice_ehr

#include "voice_ehr/asr_http.hpp"

#include <nlohmann/json.hpp>

#include "voice_ehr/error.hpp"
#include "voice_ehr/http_client.hpp"

namespace voice_ehr {

namespace {

std::string join_url(const std::string& base, const char* leaf) {
  return (!base.empty() && base.back() == '/') ? base + leaf : base + "/" + leaf;
}

}  // namespace

AsrHttpClient::AsrHttpClient(AsrHttpConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) fail(ErrorCode::BadRequest, "ASR endpoint not configured");
}

AsrCapabilities AsrHttpClient::capabilities() {
  HttpRequest req;
  req.url = join_url(config_.endpoint, "capabilities");
  req.timeout = config_.timeout;
  if (auto token = env_or_empty(config_.token_env.c_str()); !token.empty())
    req.headers.emplace_back("Authorization", "Bearer " + token);
  HttpResponse res;
  try {
    res = http_send(req);
  } catch (const Error& e) {
    fail(ErrorCode::AsrUnavailable, e.detail());
  }
  if (res.status / 100 != 2) fail(ErrorCode::AsrUnavailable, "capabilities: HTTP " + std::to_string(res.status));
  try {
    const auto j = nlohmann::json::parse(res.body);
    AsrCapabilities caps;
    caps.engine_tag = j.at("engine_tag").get<std::string>();
    caps.languages = j.value("languages", std::vector<std::string>{});
    caps.max_duration_s = j.value("max_duration_s", 0.0);
    return caps;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::AsrUnavailable, std::string("capabilities: ") + e.what());
  }
}

std::string AsrHttpClient::transcribe(const AsrRequest& request) {
  const auto wav = encode_wav(request.audio);
  HttpRequest req;
  req.method = "POST";
  req.url = join_url(config_.endpoint, "transcribe");
  req.timeout = config_.timeout;
  req.content_type = "audio/wav";
  req.body.assign(wav.begin(), wav.end());
  req.headers.emplace_back("X-Audio-Checksum", request.checksum);
  if (auto token = env_or_empty(config_.token_env.c_str()); !token.empty())
    req.headers.emplace_back("Authorization", "Bearer " + token);
  HttpResponse res;
  try {
    res = http_send(req);
  } catch (const Error& e) {
    fail(ErrorCode::AsrUnavailable, e.detail());
  }
  if (res.status / 100 != 2) fail(ErrorCode::AsrUnavailable, "transcribe: HTTP " + std::to_string(res.status));
  try {
    return nlohmann::json::parse(res.body).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::AsrUnavailable, std::string("transcribe: ") + e.what());
  }
}

}  // namespace voice_ehr

#include "voice_ehr/llm_http.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "voice_ehr/error.hpp"
#include "voice_ehr/http_client.hpp"

namespace voice_ehr {

LlmHttpClient::LlmHttpClient(LlmHttpConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) fail(ErrorCode::BadRequest, "LLM endpoint not configured");
}

std::string LlmHttpClient::complete(const std::vector<ChatMessage>& messages) {
  nlohmann::json body{{"model", config_.model}, {"temperature", 0}, {"messages", nlohmann::json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  HttpRequest req;
  req.method = "POST";
  req.url = config_.endpoint;
  req.timeout = config_.timeout;
  req.content_type = "application/json";
  req.body = body.dump();
  if (auto token = env_or_empty(config_.token_env.c_str()); !token.empty())
    req.headers.emplace_back("Authorization", "Bearer " + token);

  HttpResponse res;
  std::string error;
  try {
    res = http_send(req);
    if (res.status / 100 != 2) error = "HTTP " + std::to_string(res.status);
  } catch (const Error& e) {
    error = e.detail();
  }

  if (!config_.audit_log.empty()) {
    std::lock_guard lock(audit_mu_);
    std::ofstream audit(config_.audit_log, std::ios::app);
    audit << nlohmann::json{{"request", body}, {"status", res.status}, {"response", res.body}, {"error", error}}.dump()
          << "\n";
  }
  if (!error.empty()) fail(ErrorCode::LlmUnavailable, error);

  try {
    return nlohmann::json::parse(res.body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::LlmUnavailable, std::string("malformed completion: ") + e.what());
  }
}

}  // namespace voice_ehr

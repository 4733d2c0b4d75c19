#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace voice_ehr {

struct HttpRequest {
  std::string method = "GET";
  std::string url;  // http(s)://host[:port]/path
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::string content_type;
  std::chrono::seconds timeout{30};
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;

  std::string header(const std::string& name) const;
};

/// Blocking request. Transport failures (connect, timeout) throw Error(IoFailure);
/// any HTTP status is returned as-is.
HttpResponse http_send(const HttpRequest& request);

/// Value of an environment variable or "".
std::string env_or_empty(const char* name);

}  // namespace voice_ehr

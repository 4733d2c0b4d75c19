#include "voice_ehr/http_client.hpp"

#include <strings.h>

#include <cstdlib>

#include <httplib.h>

#include "voice_ehr/error.hpp"

namespace voice_ehr {

std::string HttpResponse::header(const std::string& name) const {
  for (const auto& [k, v] : headers)
    if (::strcasecmp(k.c_str(), name.c_str()) == 0) return v;
  return {};
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

HttpResponse http_send(const HttpRequest& req) {
  const auto scheme_end = req.url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::BadRequest, "bad url: " + req.url);
  const auto path_start = req.url.find('/', scheme_end + 3);
  const std::string origin = req.url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : req.url.substr(path_start);

  httplib::Client cli(origin);
  cli.set_connection_timeout(req.timeout);
  cli.set_read_timeout(req.timeout);
  cli.set_write_timeout(req.timeout);
  httplib::Headers headers;
  for (const auto& [k, v] : req.headers) headers.emplace(k, v);

  httplib::Result res;
  if (req.method == "GET")
    res = cli.Get(path, headers);
  else if (req.method == "POST")
    res = cli.Post(path, headers, req.body, req.content_type.empty() ? "application/octet-stream" : req.content_type);
  else if (req.method == "PUT")
    res = cli.Put(path, headers, req.body, req.content_type.empty() ? "application/octet-stream" : req.content_type);
  else if (req.method == "DELETE")
    res = cli.Delete(path, headers);
  else
    fail(ErrorCode::BadRequest, "unsupported method " + req.method);

  if (!res) fail(ErrorCode::IoFailure, req.method + " " + req.url + ": " + httplib::to_string(res.error()));
  HttpResponse out;
  out.status = res->status;
  out.body = res->body;
  for (const auto& [k, v] : res->headers) out.headers.emplace_back(k, v);
  return out;
}

}  // namespace voice_ehr

#include "voice_ehr/tokens.hpp"

#include <charconv>
#include <vector>

#include "voice_ehr/error.hpp"
#include "voice_ehr/hash.hpp"

namespace voice_ehr {

namespace {

std::string signed_part(TokenScope scope, const std::string& session_id, Timestamp expires_at) {
  return std::string(enum_name(scope)) + "." + session_id + "." +
         std::to_string(expires_at.time_since_epoch().count());
}

}  // namespace

ApiSessionToken issue_token(const std::string& secret, TokenScope scope, const std::string& session_id,
                            Timestamp expires_at) {
  if (secret.empty()) fail(ErrorCode::BadRequest, "token secret not configured");
  const std::string body = signed_part(scope, session_id, expires_at);
  return {body + "." + hmac_sha256_hex(secret, body), session_id, expires_at, scope};
}

ApiSessionToken verify_token(const std::string& secret, const std::string& token, Timestamp now) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = token.find('.', start);
    parts.push_back(token.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (parts.size() != 4) fail(ErrorCode::Unauthorized, "malformed token");
  const auto scope = enum_from_name<TokenScope>(parts[0]);
  long long ms = 0;
  const auto [ptr, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), ms);
  if (!scope || ec != std::errc{} || ptr != parts[2].data() + parts[2].size())
    fail(ErrorCode::Unauthorized, "malformed token");
  const Timestamp expires{std::chrono::milliseconds(ms)};
  const std::string body = signed_part(*scope, parts[1], expires);
  if (!constant_time_equal(hmac_sha256_hex(secret, body), parts[3])) fail(ErrorCode::Unauthorized, "bad signature");
  if (now >= expires) fail(ErrorCode::TokenExpired, "token expired");
  return {token, parts[1], expires, *scope};
}

}  // namespace voice_ehr

#pragma once

#include <chrono>
#include <string>

#include "voice_ehr/domain.hpp"
#include "voice_ehr/timeutil.hpp"

namespace voice_ehr {

enum class TokenScope { Participant, Provider, Admin };
VOICE_EHR_ENUM_TABLE(TokenScope, {TokenScope::Participant, "participant"}, {TokenScope::Provider, "provider"},
                     {TokenScope::Admin, "admin"});

inline constexpr std::chrono::hours kApiTokenTtl{24};

struct ApiSessionToken {
  std::string token;
  std::string session_id;  // "*" for admin tokens
  Timestamp expires_at{};
  TokenScope scope = TokenScope::Participant;
};

/// Stateless token "<scope>.<session_id>.<expiry ms>.<hmac-sha256 hex>".
ApiSessionToken issue_token(const std::string& secret, TokenScope scope, const std::string& session_id,
                            Timestamp expires_at);

/// Unauthorized for a malformed or forged token, TokenExpired past expiry.
ApiSessionToken verify_token(const std::string& secret, const std::string& token, Timestamp now);

}  // namespace voice_ehr

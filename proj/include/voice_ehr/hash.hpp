#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace voice_ehr {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);

/// Incremental SHA-256 for file-sized inputs.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::uint8_t> bytes);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string hmac_sha256_hex(std::string_view key, std::string_view message);

bool constant_time_equal(std::string_view a, std::string_view b);

/// `n` lowercase hex characters from the OS CSPRNG.
std::string random_hex(std::size_t n);

}  // namespace voice_ehr

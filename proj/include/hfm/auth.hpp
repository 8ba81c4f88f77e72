#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hfm::auth {

inline constexpr std::string_view kScopeStream = "session:stream";
inline constexpr std::string_view kScopeAssetsRead = "assets:read";
inline constexpr std::string_view kScopeAssetsWrite = "assets:write";
inline constexpr std::string_view kScopeLogsRead = "logs:read";
inline constexpr std::array<std::string_view, 4> kKnownScopes = {
    kScopeStream, kScopeAssetsRead, kScopeAssetsWrite, kScopeLogsRead};

inline constexpr int64_t kDefaultTokenTtlSeconds = 3600;

enum class AuthErrc { InvalidClaims, InvalidKey, Malformed, BadSignature, Expired };

std::string_view to_string(AuthErrc code);

class AuthError : public std::runtime_error {
 public:
  AuthError(AuthErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  AuthErrc code() const noexcept { return code_; }

 private:
  AuthErrc code_;
};

struct TokenClaims {
  std::string subject;
  std::set<std::string> scopes;
  int64_t issued_at = 0;
  int64_t expires_at = 0;
  std::string token_id;  // 16 lowercase hex chars

  bool has_scope(std::string_view scope) const { return scopes.contains(std::string(scope)); }
  bool operator==(const TokenClaims&) const = default;
};

/// Empty when the claims satisfy every invariant.
std::vector<std::string> claims_violations(const TokenClaims& claims);

/// Claims with a fresh random token_id, valid for `ttl_seconds` from `now`.
TokenClaims make_claims(std::string subject, std::set<std::string> scopes, int64_t now,
                        int64_t ttl_seconds = kDefaultTokenTtlSeconds);

class SigningKey {
 public:
  static constexpr size_t kSize = 32;

  SigningKey(std::span<const uint8_t> bytes, std::string key_id);

  /// 64 hex chars, surrounding whitespace ignored. key_id is derived from
  /// the key fingerprint.
  static SigningKey from_hex(std::string_view hex);
  static SigningKey load(const std::filesystem::path& path);
  static SigningKey generate();

  std::span<const uint8_t, kSize> bytes() const { return bytes_; }
  const std::string& key_id() const { return key_id_; }
  std::string to_hex() const;

 private:
  std::array<uint8_t, kSize> bytes_{};
  std::string key_id_;
};

std::string issue_token(const TokenClaims& claims, const SigningKey& key);

/// Throws AuthError{Malformed, BadSignature, Expired}.
TokenClaims verify_token(std::string_view token, const SigningKey& key, int64_t now);

// Primitives shared with tests and the gateway.
std::array<uint8_t, 32> hmac_sha256(std::span<const uint8_t> key, std::span<const uint8_t> data);
std::array<uint8_t, 32> sha256(std::span<const uint8_t> data);
std::string base64url_encode(std::span<const uint8_t> data);
/// Rejects padding, foreign characters and non-zero trailing bits.
std::optional<std::vector<uint8_t>> base64url_decode(std::string_view text);
std::string to_hex(std::span<const uint8_t> data);
std::optional<std::vector<uint8_t>> from_hex(std::string_view hex);

inline std::span<const uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

}  // namespace hfm::auth

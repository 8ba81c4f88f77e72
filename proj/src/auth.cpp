#include "hfm/auth.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include "json.hpp"
#include <sstream>

namespace hfm::auth {

using nlohmann::json;

std::string_view to_string(AuthErrc code) {
  switch (code) {
    case AuthErrc::InvalidClaims: return "invalid_claims";
    case AuthErrc::InvalidKey: return "invalid_key";
    case AuthErrc::Malformed: return "malformed";
    case AuthErrc::BadSignature: return "bad_signature";
    case AuthErrc::Expired: return "expired";
  }
  return "unknown";
}

namespace {

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '-') return 62;
  if (c == '_') return 63;
  return -1;
}

bool is_lower_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::array<uint8_t, 8> random_bytes8() {
  std::array<uint8_t, 8> out{};
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1)
    throw std::runtime_error("RAND_bytes failed");
  return out;
}

}  // namespace

std::string base64url_encode(std::span<const uint8_t> data) {
  std::string out;
  out.reserve((data.size() * 4 + 2) / 3);
  size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    const uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const size_t rest = data.size() - i;
  if (rest == 1) {
    const uint32_t v = data[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
  } else if (rest == 2) {
    const uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
  }
  return out;
}

std::optional<std::vector<uint8_t>> base64url_decode(std::string_view text) {
  if (text.size() % 4 == 1) return std::nullopt;
  std::vector<uint8_t> out;
  out.reserve(text.size() * 3 / 4);
  uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    const int v = decode_char(c);
    if (v < 0) return std::nullopt;
    acc = (acc << 6) | static_cast<uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<uint8_t>((acc >> bits) & 0xff));
    }
  }
  // Leftover bits must be zero so each byte string has one encoding.
  if (bits > 0 && (acc & ((1u << bits) - 1)) != 0) return std::nullopt;
  return out;
}

std::string to_hex(std::span<const uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out += kDigits[b >> 4];
    out += kDigits[b & 15];
  }
  return out;
}

std::optional<std::vector<uint8_t>> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::vector<uint8_t> out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<uint8_t>(hi << 4 | lo));
  }
  return out;
}

std::array<uint8_t, 32> hmac_sha256(std::span<const uint8_t> key, std::span<const uint8_t> data) {
  std::array<uint8_t, 32> out{};
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
            out.data(), &len) ||
      len != out.size())
    throw std::runtime_error("HMAC-SHA256 computation failed");
  return out;
}

std::array<uint8_t, 32> sha256(std::span<const uint8_t> data) {
  std::array<uint8_t, 32> out{};
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr))
    throw std::runtime_error("SHA-256 computation failed");
  return out;
}

// --- claims ------------------------------------------------------------------

std::vector<std::string> claims_violations(const TokenClaims& claims) {
  std::vector<std::string> out;
  if (claims.subject.empty()) out.emplace_back("subject is empty");
  if (claims.scopes.empty()) out.emplace_back("scopes is empty");
  for (const auto& scope : claims.scopes) {
    if (std::find(kKnownScopes.begin(), kKnownScopes.end(), scope) == kKnownScopes.end())
      out.push_back("unknown scope '" + scope + "'");
  }
  if (claims.expires_at <= claims.issued_at) out.emplace_back("expires_at must exceed issued_at");
  if (claims.token_id.size() != 16 || !is_lower_hex(claims.token_id))
    out.emplace_back("token_id must be 16 lowercase hex chars");
  return out;
}

TokenClaims make_claims(std::string subject, std::set<std::string> scopes, int64_t now,
                        int64_t ttl_seconds) {
  return TokenClaims{std::move(subject), std::move(scopes), now, now + ttl_seconds,
                     to_hex(random_bytes8())};
}

namespace {

json claims_to_json(const TokenClaims& c) {
  return json{{"sub", c.subject},
              {"scopes", json(std::vector<std::string>(c.scopes.begin(), c.scopes.end()))},
              {"iat", c.issued_at},
              {"exp", c.expires_at},
              {"jti", c.token_id}};
}

TokenClaims claims_from_json(const json& j) {
  if (!j.is_object()) throw AuthError(AuthErrc::Malformed, "payload is not an object");
  auto need = [&](const char* name) -> const json& {
    auto it = j.find(name);
    if (it == j.end()) throw AuthError(AuthErrc::Malformed, std::string("missing claim ") + name);
    return *it;
  };
  const json& sub = need("sub");
  const json& scopes = need("scopes");
  const json& iat = need("iat");
  const json& exp = need("exp");
  const json& jti = need("jti");
  if (!sub.is_string() || !scopes.is_array() || !iat.is_number_integer() ||
      !exp.is_number_integer() || !jti.is_string())
    throw AuthError(AuthErrc::Malformed, "ill-typed claim");
  TokenClaims c;
  c.subject = sub.get<std::string>();
  for (const auto& s : scopes) {
    if (!s.is_string()) throw AuthError(AuthErrc::Malformed, "ill-typed scope");
    c.scopes.insert(s.get<std::string>());
  }
  c.issued_at = iat.get<int64_t>();
  c.expires_at = exp.get<int64_t>();
  c.token_id = jti.get<std::string>();
  return c;
}

}  // namespace

// --- keys --------------------------------------------------------------------

SigningKey::SigningKey(std::span<const uint8_t> bytes, std::string key_id)
    : key_id_(std::move(key_id)) {
  if (bytes.size() != kSize)
    throw AuthError(AuthErrc::InvalidKey, "signing key must be exactly 32 bytes");
  std::copy(bytes.begin(), bytes.end(), bytes_.begin());
}

SigningKey SigningKey::from_hex(std::string_view hex) {
  while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.front()))) hex.remove_prefix(1);
  while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.back()))) hex.remove_suffix(1);
  if (hex.size() != 2 * kSize)
    throw AuthError(AuthErrc::InvalidKey, "key file must hold 64 hex chars");
  const auto bytes = auth::from_hex(hex);
  if (!bytes) throw AuthError(AuthErrc::InvalidKey, "key file is not hex");
  const auto fingerprint = sha256(*bytes);
  return SigningKey(*bytes, auth::to_hex(std::span(fingerprint).first(4)));
}

SigningKey SigningKey::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw AuthError(AuthErrc::InvalidKey, "cannot read key file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_hex(ss.str());
}

SigningKey SigningKey::generate() {
  std::array<uint8_t, kSize> raw{};
  if (RAND_bytes(raw.data(), static_cast<int>(raw.size())) != 1)
    throw std::runtime_error("RAND_bytes failed");
  return from_hex(auth::to_hex(raw));
}

std::string SigningKey::to_hex() const { return auth::to_hex(bytes_); }

// --- tokens ------------------------------------------------------------------

std::string issue_token(const TokenClaims& claims, const SigningKey& key) {
  if (auto v = claims_violations(claims); !v.empty())
    throw AuthError(AuthErrc::InvalidClaims, v.front());

  nlohmann::ordered_json header;
  header["alg"] = "HS256";
  header["ver"] = 1;
  header["kid"] = key.key_id();

  const std::string header_b64 = base64url_encode(as_bytes(header.dump()));
  const std::string payload_b64 = base64url_encode(as_bytes(claims_to_json(claims).dump()));
  std::string signing_input = header_b64 + "." + payload_b64;
  const auto sig = hmac_sha256(key.bytes(), as_bytes(signing_input));
  return signing_input + "." + base64url_encode(sig);
}

TokenClaims verify_token(std::string_view token, const SigningKey& key, int64_t now) {
  const auto first = token.find('.');
  const auto second = first == std::string_view::npos ? first : token.find('.', first + 1);
  if (second == std::string_view::npos || token.find('.', second + 1) != std::string_view::npos)
    throw AuthError(AuthErrc::Malformed, "token must have exactly 3 segments");

  const auto header_b64 = token.substr(0, first);
  const auto payload_b64 = token.substr(first + 1, second - first - 1);
  const auto sig_b64 = token.substr(second + 1);

  const auto header_raw = base64url_decode(header_b64);
  const auto payload_raw = base64url_decode(payload_b64);
  const auto sig = base64url_decode(sig_b64);
  if (!header_raw || !payload_raw || !sig)
    throw AuthError(AuthErrc::Malformed, "segment is not base64url");

  json header;
  try {
    header = json::parse(header_raw->begin(), header_raw->end());
  } catch (const json::exception&) {
    throw AuthError(AuthErrc::Malformed, "header is not JSON");
  }
  if (!header.is_object() || header.value("alg", "") != "HS256" || !header.contains("ver") ||
      header["ver"] != 1)
    throw AuthError(AuthErrc::Malformed, "unsupported token header");

  const auto expected = hmac_sha256(key.bytes(), as_bytes(token.substr(0, second)));
  if (sig->size() != expected.size() ||
      CRYPTO_memcmp(sig->data(), expected.data(), expected.size()) != 0)
    throw AuthError(AuthErrc::BadSignature, "signature mismatch");

  json payload;
  try {
    payload = json::parse(payload_raw->begin(), payload_raw->end());
  } catch (const json::exception&) {
    throw AuthError(AuthErrc::Malformed, "payload is not JSON");
  }
  TokenClaims claims = claims_from_json(payload);
  if (auto v = claims_violations(claims); !v.empty())
    throw AuthError(AuthErrc::Malformed, "claims violate invariants: " + v.front());
  if (now >= claims.expires_at) throw AuthError(AuthErrc::Expired, "token expired");
  return claims;
}

}  // namespace hfm::auth

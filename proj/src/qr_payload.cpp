#include "hfm/qr_payload.hpp"

#include <array>
#include <cstdio>
#include <vector>

#include "hfm/command_grammar.hpp"

namespace hfm::assets {

namespace {

constexpr std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

std::string hex8(uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

bool is_lower_hex8(std::string_view s) {
  if (s.size() != 8) return false;
  for (char c : s)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

}  // namespace

uint32_t crc32_ieee(std::span<const uint8_t> data) {
  uint32_t crc = 0xFFFFFFFFu;
  for (uint8_t b : data) crc = kCrcTable[(crc ^ b) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

uint32_t crc32_ieee(std::string_view text) {
  return crc32_ieee(std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

std::string encode_qr_payload(std::string_view asset_id) {
  if (!grammar::is_asset_code(asset_id))
    throw QrError(QrErrc::InvalidAssetId, "not a normalized asset code: " + std::string(asset_id));
  std::string body = std::string(kQrPrefix) + ":" + std::string(asset_id);
  const uint32_t crc = crc32_ieee(body);
  return body + ":" + hex8(crc);
}

std::string decode_qr_payload(std::string_view payload) {
  std::vector<std::string_view> parts;
  size_t start = 0;
  while (true) {
    const size_t colon = payload.find(':', start);
    parts.push_back(payload.substr(start, colon == std::string_view::npos ? colon : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.front() != kQrPrefix) throw QrError(QrErrc::BadPrefix, "payload does not start with MAINT1:");
  if (parts.size() != 3 || parts[1].empty() || !is_lower_hex8(parts[2]))
    throw QrError(QrErrc::BadStructure, "payload must be MAINT1:<asset_id>:<8 hex>");

  const std::string_view signed_part = payload.substr(0, kQrPrefix.size() + 1 + parts[1].size());
  if (hex8(crc32_ieee(signed_part)) != parts[2])
    throw QrError(QrErrc::ChecksumMismatch, "payload checksum does not verify");
  if (!grammar::is_asset_code(parts[1]))
    throw QrError(QrErrc::BadStructure, "payload carries a non-normalized asset id");
  return std::string(parts[1]);
}

}  // namespace hfm::assets

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hfm::assets {

inline constexpr std::string_view kQrPrefix = "MAINT1";

/// CRC-32/IEEE: reflected polynomial 0xEDB88320, init and final xor 0xFFFFFFFF.
uint32_t crc32_ieee(std::span<const uint8_t> data);
uint32_t crc32_ieee(std::string_view text);

enum class QrErrc { InvalidAssetId, BadPrefix, BadStructure, ChecksumMismatch };

class QrError : public std::runtime_error {
 public:
  QrError(QrErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  QrErrc code() const noexcept { return code_; }

 private:
  QrErrc code_;
};

/// `MAINT1:{asset_id}:{crc32 of "MAINT1:{asset_id}" as 8 lowercase hex}`
std::string encode_qr_payload(std::string_view asset_id);

/// Returns the asset id. Throws QrError{BadPrefix, BadStructure, ChecksumMismatch}.
std::string decode_qr_payload(std::string_view payload);

}  // namespace hfm::assets

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"

namespace hfm::grammar {

enum class IntentKind { BeginInspection, EndInspection, LogFinding, SetSeverity, AttachAsset, Cancel };
enum class Severity { Low, Medium, High, Critical };

std::string_view to_string(IntentKind kind);
std::string_view to_string(Severity level);
std::optional<IntentKind> intent_kind_from_string(std::string_view name);
std::optional<Severity> severity_from_string(std::string_view name);

struct FindingPayload {
  std::string text;
  bool operator==(const FindingPayload&) const = default;
};
struct SeverityPayload {
  Severity level = Severity::Low;
  bool operator==(const SeverityPayload&) const = default;
};
struct AssetPayload {
  std::string code;
  bool operator==(const AssetPayload&) const = default;
};

struct Intent {
  IntentKind kind = IntentKind::LogFinding;
  std::variant<std::monostate, FindingPayload, SeverityPayload, AssetPayload> payload;

  static Intent begin_inspection() { return {IntentKind::BeginInspection, {}}; }
  static Intent end_inspection() { return {IntentKind::EndInspection, {}}; }
  static Intent cancel() { return {IntentKind::Cancel, {}}; }
  static Intent log_finding(std::string text) { return {IntentKind::LogFinding, FindingPayload{std::move(text)}}; }
  static Intent set_severity(Severity level) { return {IntentKind::SetSeverity, SeverityPayload{level}}; }
  static Intent attach_asset(std::string code) { return {IntentKind::AttachAsset, AssetPayload{std::move(code)}}; }

  bool operator==(const Intent&) const = default;
};

/// True when the kind and payload agree and payload invariants hold.
bool is_valid(const Intent& intent);

/// `{"kind": ..., "payload": {...}}`
nlohmann::json to_json(const Intent& intent);
/// Throws std::invalid_argument on shape errors.
Intent intent_from_json(const nlohmann::json& j);

/// `[A-Z0-9]+(-[A-Z0-9]+)*`
bool is_asset_code(std::string_view code);

class EmptyUtterance : public std::runtime_error {
 public:
  EmptyUtterance() : std::runtime_error("utterance is empty after normalization") {}
};

/// ASCII-lowercases, collapses whitespace runs to one space, trims, and
/// strips terminal `.,!?`. Non-ASCII bytes pass through untouched.
std::string normalize_text(std::string_view text);

/// Control phrases are matched on the normalized words and must account for
/// the whole utterance; anything else is dictated as a LogFinding carrying
/// the original (trimmed) text. Throws EmptyUtterance.
Intent parse_utterance(std::string_view text);

}  // namespace hfm::grammar

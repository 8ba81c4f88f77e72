#include "hfm/command_grammar.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace hfm::grammar {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kKindNames = {
    "BeginInspection", "EndInspection", "LogFinding", "SetSeverity", "AttachAsset", "Cancel"};
constexpr std::array<std::string_view, 4> kSeverityNames = {"low", "medium", "high", "critical"};

// A fixed control phrase. Phrases ending in an open slot (attach asset ...)
// are handled by kAttachPrefix.
struct Phrase {
  std::array<std::string_view, 2> words;
  size_t length;
  Intent intent;
};

const std::vector<Phrase>& phrase_table() {
  static const std::vector<Phrase> table = {
      {{"begin", "inspection"}, 2, Intent::begin_inspection()},
      {{"begin", "report"}, 2, Intent::begin_inspection()},
      {{"end", "inspection"}, 2, Intent::end_inspection()},
      {{"end", "report"}, 2, Intent::end_inspection()},
      {{"severity", "low"}, 2, Intent::set_severity(Severity::Low)},
      {{"severity", "medium"}, 2, Intent::set_severity(Severity::Medium)},
      {{"severity", "high"}, 2, Intent::set_severity(Severity::High)},
      {{"severity", "critical"}, 2, Intent::set_severity(Severity::Critical)},
      {{"cancel", ""}, 1, Intent::cancel()},
      {{"cancel", "that"}, 2, Intent::cancel()},
  };
  return table;
}

constexpr std::array<std::string_view, 2> kAttachPrefix = {"attach", "asset"};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_terminal_punct(char c) { return c == '.' || c == ',' || c == '!' || c == '?'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> words;
  size_t start = 0;
  while (start < s.size()) {
    size_t end = s.find(' ', start);
    if (end == std::string_view::npos) end = s.size();
    words.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

char ascii_upper(char c) { return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c; }

}  // namespace

std::string_view to_string(IntentKind kind) { return kKindNames[static_cast<size_t>(kind)]; }
std::string_view to_string(Severity level) { return kSeverityNames[static_cast<size_t>(level)]; }

std::optional<IntentKind> intent_kind_from_string(std::string_view name) {
  for (size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<IntentKind>(i);
  return std::nullopt;
}

std::optional<Severity> severity_from_string(std::string_view name) {
  for (size_t i = 0; i < kSeverityNames.size(); ++i)
    if (kSeverityNames[i] == name) return static_cast<Severity>(i);
  return std::nullopt;
}

bool is_asset_code(std::string_view code) {
  if (code.empty() || code.front() == '-' || code.back() == '-') return false;
  char prev = '\0';
  for (char c : code) {
    const bool alnum = (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (!alnum && c != '-') return false;
    if (c == '-' && prev == '-') return false;
    prev = c;
  }
  return true;
}

bool is_valid(const Intent& intent) {
  switch (intent.kind) {
    case IntentKind::BeginInspection:
    case IntentKind::EndInspection:
    case IntentKind::Cancel:
      return std::holds_alternative<std::monostate>(intent.payload);
    case IntentKind::LogFinding: {
      const auto* p = std::get_if<FindingPayload>(&intent.payload);
      return p && !p->text.empty();
    }
    case IntentKind::SetSeverity:
      return std::holds_alternative<SeverityPayload>(intent.payload);
    case IntentKind::AttachAsset: {
      const auto* p = std::get_if<AssetPayload>(&intent.payload);
      return p && is_asset_code(p->code);
    }
  }
  return false;
}

json to_json(const Intent& intent) {
  json payload = json::object();
  if (const auto* f = std::get_if<FindingPayload>(&intent.payload)) payload["text"] = f->text;
  if (const auto* s = std::get_if<SeverityPayload>(&intent.payload)) payload["level"] = to_string(s->level);
  if (const auto* a = std::get_if<AssetPayload>(&intent.payload)) payload["code"] = a->code;
  return json{{"kind", to_string(intent.kind)}, {"payload", payload}};
}

Intent intent_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw std::invalid_argument("intent needs a string kind");
  const auto kind = intent_kind_from_string(j["kind"].get<std::string>());
  if (!kind) throw std::invalid_argument("unknown intent kind");
  const json payload = j.value("payload", json::object());
  if (!payload.is_object()) throw std::invalid_argument("intent payload must be an object");

  Intent intent{*kind, {}};
  auto field = [&](const char* name) {
    if (!payload.contains(name) || !payload[name].is_string())
      throw std::invalid_argument(std::string("intent payload needs string ") + name);
    return payload[name].get<std::string>();
  };
  switch (*kind) {
    case IntentKind::LogFinding: intent.payload = FindingPayload{field("text")}; break;
    case IntentKind::SetSeverity: {
      const auto level = severity_from_string(field("level"));
      if (!level) throw std::invalid_argument("unknown severity level");
      intent.payload = SeverityPayload{*level};
      break;
    }
    case IntentKind::AttachAsset: intent.payload = AssetPayload{field("code")}; break;
    default:
      if (!payload.empty()) throw std::invalid_argument("intent kind takes no payload");
      break;
  }
  if (!is_valid(intent)) throw std::invalid_argument("intent payload violates invariants");
  return intent;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  while (!out.empty() && (is_terminal_punct(out.back()) || out.back() == ' ')) out.pop_back();
  return out;
}

Intent parse_utterance(std::string_view text) {
  const std::string normalized = normalize_text(text);
  if (normalized.empty()) throw EmptyUtterance();
  const auto words = split_words(normalized);

  // Longest fixed phrase that is a prefix of the utterance.
  const Phrase* best = nullptr;
  for (const auto& phrase : phrase_table()) {
    if (phrase.length > words.size()) continue;
    if (!std::equal(phrase.words.begin(), phrase.words.begin() + phrase.length, words.begin()))
      continue;
    if (!best || phrase.length > best->length) best = &phrase;
  }
  if (best && best->length == words.size()) return best->intent;

  if (words.size() > kAttachPrefix.size() &&
      std::equal(kAttachPrefix.begin(), kAttachPrefix.end(), words.begin())) {
    std::string code;
    for (size_t i = kAttachPrefix.size(); i < words.size(); ++i) {
      if (!code.empty()) code += '-';
      for (char c : words[i]) code += ascii_upper(c);
    }
    if (is_asset_code(code)) return Intent::attach_asset(std::move(code));
  }

  return Intent::log_finding(std::string(trim(text)));
}

}  // namespace hfm::grammar

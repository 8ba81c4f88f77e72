#include "hfm/log_pipeline.hpp"

#include <cstdio>

namespace hfm::pipeline {

using nlohmann::json;

std::string make_entry_id(const std::string& session_id, uint64_t entry_seq) {
  char seq[24];
  std::snprintf(seq, sizeof seq, "%06llu", static_cast<unsigned long long>(entry_seq));
  return session_id + "-" + seq;
}

bool is_valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

std::pair<LogEntry, SessionContext> build_log_entry(const transcription::TranscriptHypothesis& final,
                                                    const grammar::Intent& intent,
                                                    const SessionContext& ctx, Timestamp now) {
  if (final.kind != transcription::HypothesisKind::Final)
    throw PipelineError(PipelineErrc::NotFinal, "log entries are built from final hypotheses only");
  if (final.text.empty()) throw PipelineError(PipelineErrc::EmptyTranscript, "final transcript is empty");
  if (!(final.confidence >= 0.0 && final.confidence <= 1.0))
    throw PipelineError(PipelineErrc::ConfidenceOutOfRange, "confidence outside [0,1]");

  LogEntry entry;
  entry.session_id = ctx.session_id;
  entry.entry_seq = ctx.next_entry_seq;
  entry.entry_id = make_entry_id(ctx.session_id, ctx.next_entry_seq);
  entry.operator_subject = ctx.operator_subject;
  entry.asset_id = ctx.attached_asset_id;
  entry.spoken_text = final.text;
  entry.intent = intent;
  entry.confidence = final.confidence;
  entry.logged_at = format_rfc3339_ms(now);

  SessionContext next = ctx;
  ++next.next_entry_seq;
  return {std::move(entry), std::move(next)};
}

std::vector<std::string> validate_entry(const LogEntry& e) {
  std::vector<std::string> out;
  if (e.entry_id != make_entry_id(e.session_id, e.entry_seq))
    out.emplace_back("entry_id does not match {session_id}-{entry_seq:06}");
  if (!is_valid_session_id(e.session_id)) out.emplace_back("session_id is not a valid id");
  if (e.entry_seq < 1) out.emplace_back("entry_seq must be positive");
  if (e.operator_subject.empty()) out.emplace_back("operator is empty");
  if (e.asset_id && !grammar::is_asset_code(*e.asset_id))
    out.emplace_back("asset_id is not a normalized asset code");
  if (e.spoken_text.empty()) out.emplace_back("spoken_text is empty");
  if (!grammar::is_valid(e.intent)) out.emplace_back("intent payload is invalid for its kind");
  if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) out.emplace_back("confidence outside [0,1]");
  if (!is_rfc3339_utc_ms(e.logged_at)) out.emplace_back("logged_at is not RFC 3339 UTC with milliseconds");
  if (e.schema_version != kSchemaVersion) out.emplace_back("schema_version must be 1");
  return out;
}

json to_json(const LogEntry& e) {
  return json{{"entry_id", e.entry_id},
              {"session_id", e.session_id},
              {"entry_seq", e.entry_seq},
              {"operator", e.operator_subject},
              {"asset_id", e.asset_id ? json(*e.asset_id) : json(nullptr)},
              {"spoken_text", e.spoken_text},
              {"intent", grammar::to_json(e.intent)},
              {"confidence", e.confidence},
              {"logged_at", e.logged_at},
              {"schema_version", e.schema_version}};
}

LogEntry entry_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("log entry must be an object");
  auto need = [&](const char* name) -> const json& {
    const auto it = j.find(name);
    if (it == j.end()) throw std::invalid_argument(std::string("log entry missing ") + name);
    return *it;
  };
  auto str = [&](const char* name) {
    const json& v = need(name);
    if (!v.is_string()) throw std::invalid_argument(std::string(name) + " must be a string");
    return v.get<std::string>();
  };

  LogEntry e;
  e.entry_id = str("entry_id");
  e.session_id = str("session_id");
  if (!need("entry_seq").is_number_unsigned()) throw std::invalid_argument("entry_seq must be a positive integer");
  e.entry_seq = j["entry_seq"].get<uint64_t>();
  e.operator_subject = str("operator");
  const json& asset = need("asset_id");
  if (asset.is_string()) {
    e.asset_id = asset.get<std::string>();
  } else if (!asset.is_null()) {
    throw std::invalid_argument("asset_id must be a string or null");
  }
  e.spoken_text = str("spoken_text");
  e.intent = grammar::intent_from_json(need("intent"));
  if (!need("confidence").is_number()) throw std::invalid_argument("confidence must be a number");
  e.confidence = j["confidence"].get<double>();
  e.logged_at = str("logged_at");
  if (!need("schema_version").is_number_integer()) throw std::invalid_argument("schema_version must be an integer");
  e.schema_version = j["schema_version"].get<int>();
  return e;
}

std::string encode_entry(const LogEntry& entry) { return to_json(entry).dump(); }

LogEntry decode_entry(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(e.what());
  }
  return entry_from_json(j);
}

}  // namespace hfm::pipeline

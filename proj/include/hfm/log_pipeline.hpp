#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfm/command_grammar.hpp"
#include "hfm/timestamp.hpp"
#include "hfm/transcription.hpp"
#include "json.hpp"

namespace hfm::pipeline {

inline constexpr int kSchemaVersion = 1;

/// One durable log record: the verbatim final transcript plus its parsed
/// intent and session metadata.
struct LogEntry {
  std::string entry_id;  // "{session_id}-{entry_seq:06}"
  std::string session_id;
  uint64_t entry_seq = 0;
  std::string operator_subject;  // serialized as "operator"
  std::optional<std::string> asset_id;
  std::string spoken_text;
  grammar::Intent intent;
  double confidence = 0.0;
  std::string logged_at;  // RFC 3339 UTC, millisecond precision
  int schema_version = kSchemaVersion;

  bool operator==(const LogEntry&) const = default;
};

struct SessionContext {
  std::string session_id;
  std::string operator_subject;
  std::optional<std::string> attached_asset_id;
  uint64_t next_entry_seq = 1;

  bool operator==(const SessionContext&) const = default;
};

enum class PipelineErrc { NotFinal, EmptyTranscript, ConfidenceOutOfRange };

class PipelineError : public std::runtime_error {
 public:
  PipelineError(PipelineErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  PipelineErrc code() const noexcept { return code_; }

 private:
  PipelineErrc code_;
};

std::string make_entry_id(const std::string& session_id, uint64_t entry_seq);

/// Session ids end up in storage paths: `[A-Za-z0-9_-]{1,64}`.
bool is_valid_session_id(std::string_view id);

std::pair<LogEntry, SessionContext> build_log_entry(const transcription::TranscriptHypothesis& final,
                                                    const grammar::Intent& intent,
                                                    const SessionContext& ctx, Timestamp now);

/// Every violated invariant, in field order. Empty means valid.
std::vector<std::string> validate_entry(const LogEntry& entry);

nlohmann::json to_json(const LogEntry& entry);
/// Throws std::invalid_argument when fields are missing or ill-typed.
LogEntry entry_from_json(const nlohmann::json& j);

/// Sorted keys, no whitespace, UTF-8.
std::string encode_entry(const LogEntry& entry);
LogEntry decode_entry(std::string_view text);

}  // namespace hfm::pipeline

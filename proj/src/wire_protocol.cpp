#include "hfm/wire_protocol.hpp"

#include <algorithm>

namespace hfm::wire {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 16> kTypeNames = {
    "Auth",           "AuthOk",          "AuthErr",         "SessionStart",
    "SessionStarted", "UtteranceBegin",  "UtteranceChunk",  "UtteranceEnd",
    "PartialTranscript", "FinalTranscript", "LogCommitted", "AttachAssetMsg",
    "SessionEnd",     "SessionClosed",   "Heartbeat",       "ProtocolError",
};

enum class Field { String, NonEmptyString, Count, Confidence, Bool, Tokens, OptString, OptBool };

struct FieldSpec {
  std::string_view name;
  Field kind;
};

std::vector<FieldSpec> body_schema(MessageType type) {
  using enum Field;
  switch (type) {
    case MessageType::Auth: return {{"token", NonEmptyString}};
    case MessageType::AuthOk: return {{"subject", NonEmptyString}};
    case MessageType::AuthErr: return {{"reason", NonEmptyString}};
    case MessageType::SessionStart: return {};
    case MessageType::SessionStarted: return {{"session_id", NonEmptyString}};
    case MessageType::UtteranceBegin:
    case MessageType::UtteranceEnd: return {{"utterance_id", NonEmptyString}};
    case MessageType::UtteranceChunk:
      return {{"utterance_id", NonEmptyString},
              {"chunk_index", Count},
              {"tokens", Tokens},
              {"is_last", Bool}};
    case MessageType::PartialTranscript:
    case MessageType::FinalTranscript:
      return {{"utterance_id", NonEmptyString},
              {"text", String},
              {"confidence", Confidence},
              {"hypothesis_index", Count}};
    case MessageType::LogCommitted:
      return {{"utterance_id", NonEmptyString},
              {"entry_id", NonEmptyString},
              {"path", NonEmptyString},
              {"intent", OptString},
              {"attached_asset_id", OptString},
              {"asset_unknown", OptBool}};
    case MessageType::AttachAssetMsg:
      return {{"asset_id", OptString},
              {"qr_payload", OptString},
              {"attached", OptBool},
              {"asset_unknown", OptBool}};
    case MessageType::SessionEnd:
    case MessageType::Heartbeat: return {};
    case MessageType::SessionClosed: return {};
    case MessageType::ProtocolError:
      return {{"code", NonEmptyString}, {"message", String}};
  }
  return {};
}

bool is_confidence(const json& v) {
  if (!v.is_number()) return false;
  const double d = v.get<double>();
  return d >= 0.0 && d <= 1.0;
}

void check_field(const json& body, const FieldSpec& spec, std::vector<std::string>& out) {
  const std::string name(spec.name);
  const auto it = body.find(name);
  const bool optional =
      spec.kind == Field::OptString || spec.kind == Field::OptBool;
  if (it == body.end()) {
    if (!optional) out.push_back("body." + name + " is missing");
    return;
  }
  const json& v = *it;
  bool ok = true;
  switch (spec.kind) {
    case Field::String: ok = v.is_string(); break;
    case Field::NonEmptyString: ok = v.is_string() && !v.get_ref<const std::string&>().empty(); break;
    case Field::Count: ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<int64_t>() >= 0); break;
    case Field::Confidence: ok = is_confidence(v); break;
    case Field::Bool: ok = v.is_boolean(); break;
    case Field::OptString: ok = v.is_string() || v.is_null(); break;
    case Field::OptBool: ok = v.is_boolean(); break;
    case Field::Tokens:
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& t) {
             return t.is_array() && t.size() == 2 && t[0].is_string() &&
                    !t[0].get_ref<const std::string&>().empty() && is_confidence(t[1]);
           });
      break;
  }
  if (!ok) out.push_back("body." + name + " is ill-typed");
}

}  // namespace

std::string_view to_string(MessageType type) {
  return kTypeNames[static_cast<size_t>(type)];
}

std::optional<MessageType> message_type_from_string(std::string_view name) {
  for (size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<MessageType>(i);
  }
  return std::nullopt;
}

std::string_view to_string(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::AwaitingAuth: return "AwaitingAuth";
    case SessionPhase::Ready: return "Ready";
    case SessionPhase::Active: return "Active";
    case SessionPhase::Dictating: return "Dictating";
    case SessionPhase::Closed: return "Closed";
  }
  return "?";
}

std::vector<std::string> message_violations(const ProtocolMessage& msg) {
  std::vector<std::string> out;
  if (msg.version != kProtocolVersion) out.push_back("unsupported version " + std::to_string(msg.version));
  if (msg.seq == 0) out.emplace_back("seq must be positive");
  if (msg.session_id && msg.session_id->empty()) out.emplace_back("sid is empty");
  if (!parse_rfc3339(msg.sent_at)) out.emplace_back("ts is not RFC 3339");
  if (!msg.body.is_object()) {
    out.emplace_back("body is not an object");
    return out;
  }
  for (const auto& spec : body_schema(msg.type)) check_field(msg.body, spec, out);
  if (msg.type == MessageType::AttachAssetMsg && !msg.body.contains("asset_id") &&
      !msg.body.contains("qr_payload"))
    out.emplace_back("body needs asset_id or qr_payload");
  if (msg.type == MessageType::SessionStarted && !msg.session_id)
    out.emplace_back("SessionStarted must carry sid");
  return out;
}

std::string encode_message(const ProtocolMessage& msg) {
  if (auto v = message_violations(msg); !v.empty()) throw WireError(WireErrc::InvalidMessage, v.front());
  json j = {{"v", msg.version},
            {"type", std::string(to_string(msg.type))},
            {"seq", msg.seq},
            {"ts", msg.sent_at},
            {"body", msg.body}};
  if (msg.session_id) j["sid"] = *msg.session_id;
  return j.dump();
}

ProtocolMessage decode_message(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw WireError(WireErrc::ParseError, e.what());
  }
  if (!j.is_object()) throw WireError(WireErrc::SchemaError, "envelope is not an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "v" && key != "type" && key != "seq" && key != "sid" && key != "ts" && key != "body")
      throw WireError(WireErrc::SchemaError, "unexpected envelope field " + key);
  }

  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string())
    throw WireError(WireErrc::SchemaError, "type is missing or not a string");
  const auto type = message_type_from_string(type_it->get_ref<const std::string&>());
  if (!type) throw WireError(WireErrc::UnknownType, "unknown message type " + type_it->get<std::string>());

  ProtocolMessage msg;
  msg.type = *type;
  const auto v = j.find("v");
  const auto seq = j.find("seq");
  const auto ts = j.find("ts");
  const auto body = j.find("body");
  if (v == j.end() || !v->is_number_integer()) throw WireError(WireErrc::SchemaError, "v is missing or ill-typed");
  if (seq == j.end() || !seq->is_number_unsigned()) throw WireError(WireErrc::SchemaError, "seq is missing or ill-typed");
  if (ts == j.end() || !ts->is_string()) throw WireError(WireErrc::SchemaError, "ts is missing or ill-typed");
  if (body == j.end()) throw WireError(WireErrc::SchemaError, "body is missing");
  msg.version = v->get<int>();
  msg.seq = seq->get<uint64_t>();
  msg.sent_at = ts->get<std::string>();
  msg.body = *body;
  if (const auto sid = j.find("sid"); sid != j.end()) {
    if (!sid->is_string()) throw WireError(WireErrc::SchemaError, "sid is ill-typed");
    msg.session_id = sid->get<std::string>();
  }
  if (auto problems = message_violations(msg); !problems.empty())
    throw WireError(WireErrc::SchemaError, problems.front());
  return msg;
}

ProtocolMessage Sequencer::next(MessageType type, std::optional<std::string> session_id,
                                Timestamp now, json body) {
  ProtocolMessage msg;
  msg.type = type;
  msg.seq = ++last_;
  msg.session_id = std::move(session_id);
  msg.sent_at = format_rfc3339_ms(now);
  msg.body = std::move(body);
  return msg;
}

// --- state machine -----------------------------------------------------------

namespace {

std::optional<std::string> body_string(const ProtocolMessage& msg, const char* field) {
  if (!msg.body.is_object()) return std::nullopt;
  const auto it = msg.body.find(field);
  if (it == msg.body.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

bool body_flag(const ProtocolMessage& msg, const char* field) {
  if (!msg.body.is_object()) return false;
  const auto it = msg.body.find(field);
  return it != msg.body.end() && it->is_boolean() && it->get<bool>();
}

bool same_utterance(const ProtocolMessage& msg, const std::optional<std::string>& expected) {
  return expected && body_string(msg, "utterance_id") == expected;
}

}  // namespace

Transition step_session_state(const SessionState& state, const ProtocolMessage& msg,
                              Direction direction) {
  const Transition rejected{state, false};
  if (state.phase == SessionPhase::Closed) return rejected;
  if (msg.version != kProtocolVersion) return rejected;

  const bool c2s = direction == Direction::ClientToServer;
  const uint64_t last_seq = c2s ? state.last_client_seq : state.last_server_seq;
  if (msg.seq != last_seq + 1) return rejected;

  // Once a session exists every message must name it.
  if (!state.session_id.empty() && msg.session_id != state.session_id) return rejected;

  SessionState next = state;
  (c2s ? next.last_client_seq : next.last_server_seq) = msg.seq;

  const SessionPhase phase = state.phase;
  const bool authed = phase != SessionPhase::AwaitingAuth;
  const bool active = phase == SessionPhase::Active;
  const bool dictating = phase == SessionPhase::Dictating;
  const bool awaiting_final = active && state.pending_utterance_id && !state.pending_final_sent;
  const bool awaiting_commit = active && state.pending_utterance_id && state.pending_final_sent;

  auto accept = [&]() { return Transition{next, true}; };
  auto close = [&]() {
    next.phase = SessionPhase::Closed;
    next.current_utterance_id.reset();
    next.pending_utterance_id.reset();
    next.pending_final_sent = false;
    return Transition{next, true};
  };

  switch (msg.type) {
    case MessageType::Auth:
      if (c2s && phase == SessionPhase::AwaitingAuth) return accept();
      break;
    case MessageType::AuthOk:
      if (!c2s && phase == SessionPhase::AwaitingAuth) {
        next.phase = SessionPhase::Ready;
        next.operator_subject = body_string(msg, "subject").value_or("");
        return accept();
      }
      break;
    case MessageType::AuthErr:
      if (!c2s && phase == SessionPhase::AwaitingAuth) return close();
      break;
    case MessageType::SessionStart:
      if (c2s && phase == SessionPhase::Ready) return accept();
      break;
    case MessageType::SessionStarted: {
      const auto sid = body_string(msg, "session_id");
      if (!c2s && phase == SessionPhase::Ready && sid && !sid->empty() && msg.session_id == sid) {
        next.phase = SessionPhase::Active;
        next.session_id = *sid;
        next.next_entry_seq = 1;
        return accept();
      }
      break;
    }
    case MessageType::UtteranceBegin: {
      const auto id = body_string(msg, "utterance_id");
      if (c2s && active && !state.pending_utterance_id && id && !id->empty()) {
        next.phase = SessionPhase::Dictating;
        next.current_utterance_id = *id;
        return accept();
      }
      break;
    }
    case MessageType::UtteranceChunk:
      if (c2s && dictating && same_utterance(msg, state.current_utterance_id)) return accept();
      break;
    case MessageType::UtteranceEnd:
      if (c2s && dictating && same_utterance(msg, state.current_utterance_id)) {
        next.phase = SessionPhase::Active;
        next.pending_utterance_id = std::move(next.current_utterance_id);
        next.current_utterance_id.reset();
        next.pending_final_sent = false;
        return accept();
      }
      break;
    case MessageType::PartialTranscript:
      if (!c2s && ((dictating && same_utterance(msg, state.current_utterance_id)) ||
                   (awaiting_final && same_utterance(msg, state.pending_utterance_id))))
        return accept();
      break;
    case MessageType::FinalTranscript:
      if (!c2s && awaiting_final && same_utterance(msg, state.pending_utterance_id)) {
        if (body_string(msg, "text").value_or("").empty()) {
          // Empty finals are never logged, so no LogCommitted follows.
          next.pending_utterance_id.reset();
        } else {
          next.pending_final_sent = true;
        }
        return accept();
      }
      break;
    case MessageType::LogCommitted:
      if (!c2s && awaiting_commit && same_utterance(msg, state.pending_utterance_id)) {
        next.pending_utterance_id.reset();
        next.pending_final_sent = false;
        ++next.next_entry_seq;
        if (const auto asset = body_string(msg, "attached_asset_id")) next.attached_asset_id = asset;
        return accept();
      }
      break;
    case MessageType::AttachAssetMsg:
      if (phase == SessionPhase::Ready || active) {
        if (!c2s && body_flag(msg, "attached")) next.attached_asset_id = body_string(msg, "asset_id");
        return accept();
      }
      break;
    case MessageType::SessionEnd:
      if (c2s && authed) return accept();
      break;
    case MessageType::SessionClosed:
      if (!c2s && authed) return close();
      break;
    case MessageType::Heartbeat:
      if (authed) return accept();
      break;
    case MessageType::ProtocolError:
      if (!c2s) return close();
      break;
  }
  return rejected;
}

}  // namespace hfm::wire

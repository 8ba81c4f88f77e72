#include "hfm/gateway/session_handler.hpp"

#include <openssl/rand.h>

#include <limits>

#include "hfm/crash_points.hpp"
#include "hfm/qr_payload.hpp"

namespace hfm::gateway {

using nlohmann::json;
using wire::Direction;
using wire::MessageType;
using wire::ProtocolMessage;

Services::Services(auth::SigningKey key, store::LogStore& store, assets::AssetRegistry& registry,
                   Clock clock, size_t max_sessions)
    : key(std::move(key)),
      store(store),
      registry(registry),
      clock(std::move(clock)),
      max_sessions(max_sessions) {}

std::string Services::new_session_id() {
  std::array<uint8_t, 4> raw{};
  if (RAND_bytes(raw.data(), static_cast<int>(raw.size())) != 1) throw std::runtime_error("RAND_bytes failed");
  return "s-" + auth::to_hex(raw);
}

std::optional<SessionSlot> SessionSlot::acquire(Services& services) {
  size_t current = services.active_sessions.load();
  do {
    if (current >= services.max_sessions) return std::nullopt;
  } while (!services.active_sessions.compare_exchange_weak(current, current + 1));
  return SessionSlot(services);
}

void SessionSlot::release() {
  if (services_) --services_->active_sessions;
  services_ = nullptr;
}

std::string_view auth_error_reason(auth::AuthErrc code) {
  switch (code) {
    case auth::AuthErrc::BadSignature: return "bad_signature";
    case auth::AuthErrc::Expired: return "expired";
    default: return "malformed";
  }
}

namespace {

std::string_view wire_error_code(wire::WireErrc code) {
  switch (code) {
    case wire::WireErrc::ParseError: return "parse_error";
    case wire::WireErrc::UnknownType: return "unknown_type";
    default: return "schema_error";
  }
}

std::string_view transcription_error_code(transcription::TranscriptionErrc code) {
  switch (code) {
    case transcription::TranscriptionErrc::DuplicateUtterance: return "duplicate_utterance";
    case transcription::TranscriptionErrc::UnknownUtterance: return "unknown_utterance";
    case transcription::TranscriptionErrc::OutOfOrderChunk: return "out_of_order_chunk";
    case transcription::TranscriptionErrc::InvalidChunk: return "invalid_chunk";
  }
  return "transcription";
}

}  // namespace

SessionHandler::SessionHandler(Services& services) : services_(services) {}

SessionHandler::~SessionHandler() = default;

void SessionHandler::emit(Outcome& out, MessageType type, json body) {
  std::optional<std::string> sid;
  if (!state_.session_id.empty()) sid = state_.session_id;
  if (type == MessageType::SessionStarted) sid = body.value("session_id", "");

  ProtocolMessage msg = sequencer_.next(type, std::move(sid), services_.now(), std::move(body));
  const auto step = wire::step_session_state(state_, msg, Direction::ServerToClient);
  if (!step.allowed)
    throw std::logic_error("gateway attempted illegal " + std::string(wire::to_string(type)));
  state_ = step.state;
  out.frames.push_back(wire::encode_message(msg));
}

SessionHandler::Outcome SessionHandler::fail(std::string code, std::string message, Outcome out) {
  out.close = true;
  if (state_.current_utterance_id) engine_.discard_utterance(*state_.current_utterance_id);
  early_final_.reset();
  if (state_.phase != wire::SessionPhase::Closed)
    emit(out, MessageType::ProtocolError, json{{"code", std::move(code)}, {"message", std::move(message)}});
  return out;
}

SessionHandler::Outcome SessionHandler::on_frame(std::string_view text) {
  if (state_.phase == wire::SessionPhase::Closed) return Outcome{{}, true};

  ProtocolMessage msg;
  try {
    msg = wire::decode_message(text);
  } catch (const wire::WireError& e) {
    return fail(std::string(wire_error_code(e.code())), e.what());
  }

  const auto step = wire::step_session_state(state_, msg, Direction::ClientToServer);
  if (!step.allowed) {
    return fail("illegal_transition", std::string(wire::to_string(msg.type)) + " not allowed in " +
                                          std::string(wire::to_string(state_.phase)));
  }
  state_ = step.state;

  Outcome out;
  try {
    switch (msg.type) {
      case MessageType::Auth: authenticate(msg, out); break;
      case MessageType::SessionStart: start_session(out); break;
      case MessageType::AttachAssetMsg: attach_asset(msg, out); break;
      case MessageType::UtteranceBegin:
        engine_.open_utterance(msg.body["utterance_id"].get<std::string>());
        early_final_.reset();
        break;
      case MessageType::UtteranceChunk: feed_chunk(msg, out); break;
      case MessageType::UtteranceEnd: end_utterance(msg, out); break;
      case MessageType::SessionEnd:
        if (state_.current_utterance_id) engine_.discard_utterance(*state_.current_utterance_id);
        emit(out, MessageType::SessionClosed,
             json{{"entries_committed", context_.next_entry_seq - 1}});
        out.close = true;
        break;
      case MessageType::Heartbeat: emit(out, MessageType::Heartbeat, json::object()); break;
      default: return fail("illegal_transition", "unexpected message");
    }
  } catch (const transcription::TranscriptionError& e) {
    return fail(std::string(transcription_error_code(e.code())), e.what(), std::move(out));
  } catch (const store::StoreError& e) {
    return fail("storage", e.what(), std::move(out));
  } catch (const std::exception& e) {
    return fail("internal", e.what(), std::move(out));
  }
  return out;
}

SessionHandler::Outcome SessionHandler::on_heartbeat_timeout() {
  if (state_.phase == wire::SessionPhase::Closed) return Outcome{{}, true};
  return fail("timeout", "no message within the heartbeat timeout");
}

void SessionHandler::on_disconnect() {
  if (state_.current_utterance_id) engine_.discard_utterance(*state_.current_utterance_id);
  early_final_.reset();
  state_.phase = wire::SessionPhase::Closed;
  slot_.reset();
}

void SessionHandler::authenticate(const ProtocolMessage& msg, Outcome& out) {
  const auto token = msg.body["token"].get<std::string>();
  try {
    const auto claims = auth::verify_token(token, services_.key, unix_seconds(services_.now()));
    if (!claims.has_scope(auth::kScopeStream)) {
      emit(out, MessageType::AuthErr, json{{"reason", "missing_scope"}});
      out.close = true;
      return;
    }
    emit(out, MessageType::AuthOk, json{{"subject", claims.subject}});
  } catch (const auth::AuthError& e) {
    emit(out, MessageType::AuthErr, json{{"reason", auth_error_reason(e.code())}});
    out.close = true;
  }
}

void SessionHandler::start_session(Outcome& out) {
  slot_ = SessionSlot::acquire(services_);
  if (!slot_) {
    out = fail("max_sessions", "session limit reached");
    return;
  }
  context_ = pipeline::SessionContext{services_.new_session_id(), state_.operator_subject, std::nullopt, 1};
  emit(out, MessageType::SessionStarted, json{{"session_id", context_.session_id}});
}

void SessionHandler::attach_asset(const ProtocolMessage& msg, Outcome& out) {
  json reply = json::object();
  std::string asset_id;
  if (msg.body.contains("qr_payload") && msg.body["qr_payload"].is_string()) {
    const auto payload = msg.body["qr_payload"].get<std::string>();
    reply["qr_payload"] = payload;
    try {
      asset_id = assets::decode_qr_payload(payload);
    } catch (const assets::QrError& e) {
      reply["attached"] = false;
      reply["reason"] = e.what();
      emit(out, MessageType::AttachAssetMsg, std::move(reply));
      return;
    }
  } else if (msg.body.contains("asset_id") && msg.body["asset_id"].is_string()) {
    asset_id = msg.body["asset_id"].get<std::string>();
  }
  reply["asset_id"] = asset_id;
  if (grammar::is_asset_code(asset_id) && services_.registry.contains(asset_id)) {
    context_.attached_asset_id = asset_id;
    reply["attached"] = true;
  } else {
    reply["attached"] = false;
    reply["asset_unknown"] = true;
  }
  emit(out, MessageType::AttachAssetMsg, std::move(reply));
}

void SessionHandler::feed_chunk(const ProtocolMessage& msg, Outcome& out) {
  transcription::UtteranceChunk chunk;
  chunk.utterance_id = msg.body["utterance_id"].get<std::string>();
  const auto index = msg.body["chunk_index"].get<uint64_t>();
  if (index > std::numeric_limits<uint32_t>::max())
    throw transcription::TranscriptionError(transcription::TranscriptionErrc::OutOfOrderChunk, "chunk index out of range");
  chunk.chunk_index = static_cast<uint32_t>(index);
  chunk.is_last = msg.body["is_last"].get<bool>();
  for (const auto& t : msg.body["tokens"]) chunk.tokens.push_back({t[0].get<std::string>(), t[1].get<double>()});

  for (auto& h : engine_.feed_chunk(chunk)) {
    if (h.kind == transcription::HypothesisKind::Final) {
      early_final_ = std::move(h);
      continue;
    }
    emit(out, MessageType::PartialTranscript,
         json{{"utterance_id", h.utterance_id},
              {"text", h.text},
              {"confidence", h.confidence},
              {"hypothesis_index", h.hypothesis_index}});
  }
}

void SessionHandler::apply_intent(const grammar::Intent& intent, json& commit_body) {
  switch (intent.kind) {
    case grammar::IntentKind::BeginInspection: inspection_open_ = true; break;
    case grammar::IntentKind::EndInspection:
      inspection_open_ = false;
      severity_.reset();
      break;
    case grammar::IntentKind::SetSeverity:
      severity_ = std::get<grammar::SeverityPayload>(intent.payload).level;
      break;
    case grammar::IntentKind::Cancel: severity_.reset(); break;
    case grammar::IntentKind::AttachAsset: {
      const auto& code = std::get<grammar::AssetPayload>(intent.payload).code;
      if (services_.registry.contains(code)) {
        context_.attached_asset_id = code;
      } else {
        commit_body["asset_unknown"] = true;
      }
      break;
    }
    case grammar::IntentKind::LogFinding: break;
  }
}

void SessionHandler::end_utterance(const ProtocolMessage& msg, Outcome& out) {
  const auto utterance_id = msg.body["utterance_id"].get<std::string>();
  transcription::TranscriptHypothesis final =
      early_final_ ? std::move(*early_final_) : engine_.close_utterance(utterance_id);
  early_final_.reset();

  emit(out, MessageType::FinalTranscript,
       json{{"utterance_id", utterance_id},
            {"text", final.text},
            {"confidence", final.confidence},
            {"hypothesis_index", final.hypothesis_index}});
  if (final.text.empty()) return;

  grammar::Intent intent;
  try {
    intent = grammar::parse_utterance(final.text);
  } catch (const grammar::EmptyUtterance&) {
    // Only punctuation was spoken; keep it verbatim as dictation.
    intent = grammar::Intent::log_finding(final.text);
  }

  json commit = {{"utterance_id", utterance_id}, {"intent", grammar::to_string(intent.kind)}};
  apply_intent(intent, commit);

  auto [entry, next_context] = pipeline::build_log_entry(final, intent, context_, services_.now());
  const std::string path = services_.store.append_entry(entry);
  context_ = std::move(next_context);

  crash::reach(crash::CrashPoint::PreAck);
  commit["entry_id"] = entry.entry_id;
  commit["path"] = path;
  commit["attached_asset_id"] = context_.attached_asset_id ? json(*context_.attached_asset_id) : json(nullptr);
  emit(out, MessageType::LogCommitted, std::move(commit));
}

}  // namespace hfm::gateway

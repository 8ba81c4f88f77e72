#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hfm/timestamp.hpp"
#include "json.hpp"

namespace hfm::wire {

inline constexpr int kProtocolVersion = 1;

enum class MessageType {
  Auth,
  AuthOk,
  AuthErr,
  SessionStart,
  SessionStarted,
  UtteranceBegin,
  UtteranceChunk,
  UtteranceEnd,
  PartialTranscript,
  FinalTranscript,
  LogCommitted,
  AttachAssetMsg,
  SessionEnd,
  SessionClosed,
  Heartbeat,
  ProtocolError,
};

inline constexpr std::array<MessageType, 16> kAllMessageTypes = {
    MessageType::Auth,           MessageType::AuthOk,           MessageType::AuthErr,
    MessageType::SessionStart,   MessageType::SessionStarted,   MessageType::UtteranceBegin,
    MessageType::UtteranceChunk, MessageType::UtteranceEnd,     MessageType::PartialTranscript,
    MessageType::FinalTranscript, MessageType::LogCommitted,    MessageType::AttachAssetMsg,
    MessageType::SessionEnd,     MessageType::SessionClosed,    MessageType::Heartbeat,
    MessageType::ProtocolError,
};

std::string_view to_string(MessageType type);
std::optional<MessageType> message_type_from_string(std::string_view name);

struct ProtocolMessage {
  int version = kProtocolVersion;
  MessageType type = MessageType::Heartbeat;
  uint64_t seq = 1;
  std::optional<std::string> session_id;
  std::string sent_at;  // RFC 3339 UTC
  nlohmann::json body = nlohmann::json::object();

  bool operator==(const ProtocolMessage&) const = default;
};

enum class WireErrc { InvalidMessage, ParseError, UnknownType, SchemaError };

class WireError : public std::runtime_error {
 public:
  WireError(WireErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  WireErrc code() const noexcept { return code_; }

 private:
  WireErrc code_;
};

/// Envelope and per-type body checks. Empty when the message is well formed.
std::vector<std::string> message_violations(const ProtocolMessage& msg);

/// Single-line JSON `{"v","type","seq","sid","ts","body"}`; `sid` is omitted
/// before a session exists. Throws WireError{InvalidMessage}.
std::string encode_message(const ProtocolMessage& msg);

/// Throws WireError{ParseError, UnknownType, SchemaError}.
ProtocolMessage decode_message(std::string_view text);

/// Hands out strictly increasing seq numbers for one sender on one connection.
class Sequencer {
 public:
  ProtocolMessage next(MessageType type, std::optional<std::string> session_id, Timestamp now,
                       nlohmann::json body = nlohmann::json::object());
  uint64_t last() const { return last_; }

 private:
  uint64_t last_ = 0;
};

// --- session state machine ---------------------------------------------------

enum class Direction { ClientToServer, ServerToClient };

enum class SessionPhase { AwaitingAuth, Ready, Active, Dictating, Closed };

std::string_view to_string(SessionPhase phase);

struct SessionState {
  SessionPhase phase = SessionPhase::AwaitingAuth;
  std::string session_id;
  std::string operator_subject;
  std::optional<std::string> attached_asset_id;
  std::optional<std::string> current_utterance_id;  // set iff phase == Dictating
  // Utterance whose UtteranceEnd was accepted while the server still owes its
  // FinalTranscript (and, for a non-empty final, its LogCommitted).
  std::optional<std::string> pending_utterance_id;
  bool pending_final_sent = false;
  uint64_t next_entry_seq = 1;
  uint64_t last_client_seq = 0;
  uint64_t last_server_seq = 0;

  bool operator==(const SessionState&) const = default;
};

struct Transition {
  SessionState state;
  bool allowed = false;
};

/// Pure transition function. A rejected message leaves the state unchanged.
/// Besides the phase table this enforces per-sender seq contiguity, session
/// id agreement once a session exists, and utterance id agreement.
Transition step_session_state(const SessionState& state, const ProtocolMessage& msg,
                              Direction direction);

}  // namespace hfm::wire

#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hfm/asset_registry.hpp"
#include "hfm/auth.hpp"
#include "hfm/command_grammar.hpp"
#include "hfm/log_pipeline.hpp"
#include "hfm/log_store.hpp"
#include "hfm/timestamp.hpp"
#include "hfm/transcription.hpp"
#include "hfm/wire_protocol.hpp"

namespace hfm::gateway {

/// Everything a session needs from the running service. Shared by all
/// connections; each member is safe for concurrent use.
struct Services {
  Services(auth::SigningKey key, store::LogStore& store, assets::AssetRegistry& registry, Clock clock,
           size_t max_sessions);

  Timestamp now() { return clock.now(); }
  std::string new_session_id();

  auth::SigningKey key;
  store::LogStore& store;
  assets::AssetRegistry& registry;
  MonotoneClock clock;
  size_t max_sessions;
  std::atomic<size_t> active_sessions{0};
};

/// Holds one of the `max_sessions` slots for as long as it lives.
class SessionSlot {
 public:
  static std::optional<SessionSlot> acquire(Services& services);
  SessionSlot(SessionSlot&& other) noexcept : services_(std::exchange(other.services_, nullptr)) {}
  SessionSlot& operator=(SessionSlot&& other) noexcept {
    if (this != &other) {
      release();
      services_ = std::exchange(other.services_, nullptr);
    }
    return *this;
  }
  ~SessionSlot() { release(); }

 private:
  explicit SessionSlot(Services& services) : services_(&services) {}
  void release();
  Services* services_;
};

/// Reasons carried by AuthErr.
std::string_view auth_error_reason(auth::AuthErrc code);

/// One stream connection's protocol logic, independent of the transport:
/// frames in, frames out. Not thread-safe; the transport serializes calls.
class SessionHandler {
 public:
  struct Outcome {
    std::vector<std::string> frames;  // encoded, to be sent in order
    bool close = false;               // close the connection after sending
  };

  explicit SessionHandler(Services& services);
  ~SessionHandler();

  Outcome on_frame(std::string_view text);
  Outcome on_heartbeat_timeout();
  /// Transport went away: discards any open utterance.
  void on_disconnect();

  const wire::SessionState& state() const { return state_; }
  const pipeline::SessionContext& context() const { return context_; }
  bool inspection_open() const { return inspection_open_; }
  std::optional<grammar::Severity> severity() const { return severity_; }

 private:
  void emit(Outcome& out, wire::MessageType type, nlohmann::json body);
  // Frames already in `out` are kept ahead of the ProtocolError.
  Outcome fail(std::string code, std::string message, Outcome out);
  Outcome fail(std::string code, std::string message) { return fail(std::move(code), std::move(message), Outcome{}); }

  void authenticate(const wire::ProtocolMessage& msg, Outcome& out);
  void start_session(Outcome& out);
  void attach_asset(const wire::ProtocolMessage& msg, Outcome& out);
  void feed_chunk(const wire::ProtocolMessage& msg, Outcome& out);
  void end_utterance(const wire::ProtocolMessage& msg, Outcome& out);
  void apply_intent(const grammar::Intent& intent, nlohmann::json& commit_body);

  Services& services_;
  wire::SessionState state_;
  wire::Sequencer sequencer_;
  transcription::ScriptedProvider engine_;
  std::optional<transcription::TranscriptHypothesis> early_final_;
  pipeline::SessionContext context_;
  std::optional<SessionSlot> slot_;
  bool inspection_open_ = false;
  std::optional<grammar::Severity> severity_;
};

}  // namespace hfm::gateway

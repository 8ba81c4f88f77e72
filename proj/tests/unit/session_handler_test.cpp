#include <fstream>

#include "doctest.h"
#include "hfm/gateway/session_handler.hpp"
#include "hfm/qr_payload.hpp"
#include "temp_dir.hpp"

using namespace hfm;
using namespace hfm::gateway;
using wire::MessageType;
using nlohmann::json;

namespace {

const Timestamp kStart = from_unix_seconds(1'735'732'800);  // 2025-01-01T12:00:00Z
const auth::SigningKey kKey = auth::SigningKey::from_hex(std::string(64, '1'));

struct Harness {
  explicit Harness(size_t max_sessions = 4)
      : store(dir / "data", {false}),
        registry(dir / "assets.jsonl"),
        services(kKey, store, registry, [this] { return now; }, max_sessions) {}

  std::string token(std::set<std::string> scopes = {std::string(auth::kScopeStream)}, int64_t ttl = 600) {
    return auth::issue_token(auth::make_claims("tech-01", std::move(scopes), unix_seconds(now), ttl), kKey);
  }

  // Sends one client frame; returns the decoded replies after checking each
  // against the client's view of the state machine.
  std::vector<wire::ProtocolMessage> send(SessionHandler& h, MessageType type, json body = json::object()) {
    std::optional<std::string> sid;
    if (!client.session_id.empty()) sid = client.session_id;
    const auto msg = seq.next(type, sid, now, std::move(body));
    const auto step = wire::step_session_state(client, msg, wire::Direction::ClientToServer);
    REQUIRE_MESSAGE(step.allowed, "test sent illegal " << wire::to_string(type));
    client = step.state;
    return absorb(h.on_frame(wire::encode_message(msg)));
  }

  std::vector<wire::ProtocolMessage> absorb(const SessionHandler::Outcome& outcome) {
    std::vector<wire::ProtocolMessage> out;
    for (const auto& frame : outcome.frames) {
      auto msg = wire::decode_message(frame);
      const auto step = wire::step_session_state(client, msg, wire::Direction::ServerToClient);
      CHECK_MESSAGE(step.allowed, "gateway sent illegal " << wire::to_string(msg.type));
      client = step.state;
      out.push_back(std::move(msg));
    }
    closed = outcome.close;
    return out;
  }

  void open_session(SessionHandler& h) {
    auto r = send(h, MessageType::Auth, {{"token", token()}});
    REQUIRE(r.size() == 1);
    REQUIRE(r[0].type == MessageType::AuthOk);
    r = send(h, MessageType::SessionStart);
    REQUIRE(r.size() == 1);
    REQUIRE(r[0].type == MessageType::SessionStarted);
  }

  std::vector<wire::ProtocolMessage> say(SessionHandler& h, const std::string& uid, const std::vector<std::string>& words) {
    send(h, MessageType::UtteranceBegin, {{"utterance_id", uid}});
    for (size_t i = 0; i < words.size(); ++i) {
      const auto r = send(h, MessageType::UtteranceChunk,
                          {{"utterance_id", uid},
                           {"chunk_index", i},
                           {"tokens", json::array({json::array({words[i], 0.9})})},
                           {"is_last", false}});
      CHECK(r.size() == 1);
      if (!r.empty()) CHECK(r[0].type == MessageType::PartialTranscript);
    }
    return send(h, MessageType::UtteranceEnd, {{"utterance_id", uid}});
  }

  testing::TempDir dir;
  store::LogStore store;
  assets::AssetRegistry registry;
  Timestamp now = kStart;
  Services services;
  wire::Sequencer seq;
  wire::SessionState client;
  bool closed = false;
};

std::string reason_of(const std::vector<wire::ProtocolMessage>& r) {
  REQUIRE(r.size() == 1);
  return r[0].body.value("reason", r[0].body.value("code", std::string()));
}

}  // namespace

TEST_CASE("authentication outcomes") {
  SUBCASE("valid") {
    Harness t;
    SessionHandler h(t.services);
    const auto r = t.send(h, MessageType::Auth, {{"token", t.token()}});
    CHECK(r[0].type == MessageType::AuthOk);
    CHECK(r[0].body["subject"] == "tech-01");
    CHECK_FALSE(t.closed);
  }
  SUBCASE("expired") {
    Harness t;
    SessionHandler h(t.services);
    const auto token = t.token();
    t.now += std::chrono::seconds(600);
    const auto r = t.send(h, MessageType::Auth, {{"token", token}});
    CHECK(r[0].type == MessageType::AuthErr);
    CHECK(reason_of(r) == "expired");
    CHECK(t.closed);
  }
  SUBCASE("bad signature") {
    Harness t;
    SessionHandler h(t.services);
    const auto foreign = auth::issue_token(auth::make_claims("x", {"session:stream"}, unix_seconds(t.now)),
                                           auth::SigningKey::from_hex(std::string(64, '2')));
    CHECK(reason_of(t.send(h, MessageType::Auth, {{"token", foreign}})) == "bad_signature");
  }
  SUBCASE("malformed") {
    Harness t;
    SessionHandler h(t.services);
    CHECK(reason_of(t.send(h, MessageType::Auth, {{"token", "not-a-token"}})) == "malformed");
  }
  SUBCASE("missing scope") {
    Harness t;
    SessionHandler h(t.services);
    CHECK(reason_of(t.send(h, MessageType::Auth, {{"token", t.token({"logs:read"})}})) == "missing_scope");
    CHECK(t.closed);
  }
}

TEST_CASE("a Heartbeat before authentication is a protocol error") {
  Harness t;
  SessionHandler h(t.services);
  const auto out = h.on_frame(wire::encode_message(t.seq.next(MessageType::Heartbeat, std::nullopt, t.now)));
  REQUIRE(out.frames.size() == 1);
  const auto msg = wire::decode_message(out.frames[0]);
  CHECK(msg.type == MessageType::ProtocolError);
  CHECK(msg.body["code"] == "illegal_transition");
  CHECK(out.close);
}

TEST_CASE("undecodable frames") {
  Harness t;
  SessionHandler h(t.services);
  auto out = h.on_frame("{nope");
  CHECK(wire::decode_message(out.frames.at(0)).body["code"] == "parse_error");
  CHECK(out.close);
  // Once closed the handler stays silent.
  CHECK(h.on_frame("{}").frames.empty());

  SessionHandler h2(t.services);
  out = h2.on_frame(R"({"v":1,"type":"Warp","seq":1,"ts":"2025-01-01T00:00:00Z","body":{}})");
  CHECK(wire::decode_message(out.frames.at(0)).body["code"] == "unknown_type");
}

TEST_CASE("an utterance produces partials, a final and one stored entry") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);
  const auto r = t.say(h, "u-1", {"Crack", "near", "weld"});
  REQUIRE(r.size() == 2);
  CHECK(r[0].type == MessageType::FinalTranscript);
  CHECK(r[0].body["text"] == "Crack near weld");
  CHECK(r[1].type == MessageType::LogCommitted);
  CHECK(r[1].body["intent"] == "LogFinding");
  const auto sid = t.client.session_id;
  CHECK(r[1].body["entry_id"] == sid + "-000001");
  CHECK(r[1].body["path"] == "logs/2025-01-01/" + sid + "/000001.json");

  const auto stored = t.store.read_session_entries(sid).entries;
  REQUIRE(stored.size() == 1);
  CHECK(stored[0].spoken_text == "Crack near weld");
  CHECK(stored[0].logged_at == "2025-01-01T12:00:00.000Z");
  CHECK(stored[0].operator_subject == "tech-01");
}

TEST_CASE("commands are logged and change session state") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);
  CHECK(t.say(h, "u-1", {"begin", "inspection"})[1].body["intent"] == "BeginInspection");
  CHECK(h.inspection_open());
  t.say(h, "u-2", {"severity", "high"});
  CHECK(h.severity() == grammar::Severity::High);
  t.say(h, "u-3", {"cancel"});
  CHECK_FALSE(h.severity());
  t.say(h, "u-4", {"end", "report"});
  CHECK_FALSE(h.inspection_open());
  CHECK(t.store.read_session_entries(t.client.session_id).entries.size() == 4);
}

TEST_CASE("spoken asset attachment") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);

  auto r = t.say(h, "u-1", {"attach", "asset", "rail", "42"});
  CHECK(r[1].body["intent"] == "AttachAsset");
  CHECK(r[1].body["asset_unknown"] == true);
  CHECK(r[1].body["attached_asset_id"].is_null());
  CHECK_FALSE(h.context().attached_asset_id);

  t.registry.register_asset({"RAIL-42", "rail-segment", "", {}, "2025-01-01T00:00:00.000Z"});
  r = t.say(h, "u-2", {"attach", "asset", "rail", "42"});
  CHECK_FALSE(r[1].body.contains("asset_unknown"));
  CHECK(r[1].body["attached_asset_id"] == "RAIL-42");
  CHECK(h.context().attached_asset_id == "RAIL-42");
  CHECK(t.client.attached_asset_id == "RAIL-42");

  t.say(h, "u-3", {"wear"});
  const auto entries = t.store.read_session_entries(t.client.session_id).entries;
  REQUIRE(entries.size() == 3);
  CHECK_FALSE(entries[0].asset_id);
  CHECK(entries[1].asset_id == "RAIL-42");
  CHECK(entries[2].asset_id == "RAIL-42");
}

TEST_CASE("asset attachment by message and QR payload") {
  Harness t;
  t.registry.register_asset({"PUMP-7-B", "pump", "", {}, "2025-01-01T00:00:00.000Z"});
  SessionHandler h(t.services);
  t.open_session(h);

  auto r = t.send(h, MessageType::AttachAssetMsg, {{"qr_payload", assets::encode_qr_payload("PUMP-7-B")}});
  REQUIRE(r.size() == 1);
  CHECK(r[0].body["attached"] == true);
  CHECK(h.context().attached_asset_id == "PUMP-7-B");

  r = t.send(h, MessageType::AttachAssetMsg, {{"qr_payload", "MAINT1:PUMP-7-B:00000000"}});
  CHECK(r[0].body["attached"] == false);
  CHECK(r[0].body.contains("reason"));
  CHECK(h.context().attached_asset_id == "PUMP-7-B");

  r = t.send(h, MessageType::AttachAssetMsg, {{"asset_id", "GHOST-1"}});
  CHECK(r[0].body["attached"] == false);
  CHECK(r[0].body["asset_unknown"] == true);
}

TEST_CASE("an utterance with no words commits nothing") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);
  const auto r = t.say(h, "u-1", {});
  REQUIRE(r.size() == 1);
  CHECK(r[0].type == MessageType::FinalTranscript);
  CHECK(r[0].body["text"] == "");
  CHECK(t.say(h, "u-2", {"ok"}).size() == 2);
  CHECK(t.store.read_session_entries(t.client.session_id).entries.size() == 1);
}

TEST_CASE("a final chunk flagged is_last still finalizes on UtteranceEnd") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);
  t.send(h, MessageType::UtteranceBegin, {{"utterance_id", "u-1"}});
  auto r = t.send(h, MessageType::UtteranceChunk,
                  {{"utterance_id", "u-1"}, {"chunk_index", 0}, {"tokens", json::array({json::array({"leak", 0.7})})}, {"is_last", true}});
  REQUIRE(r.size() == 1);
  CHECK(r[0].type == MessageType::PartialTranscript);
  r = t.send(h, MessageType::UtteranceEnd, {{"utterance_id", "u-1"}});
  REQUIRE(r.size() == 2);
  CHECK(r[0].body["text"] == "leak");
}

TEST_CASE("out-of-order chunks end the session") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);
  t.send(h, MessageType::UtteranceBegin, {{"utterance_id", "u-1"}});
  const auto r = t.send(h, MessageType::UtteranceChunk,
                        {{"utterance_id", "u-1"}, {"chunk_index", 3}, {"tokens", json::array()}, {"is_last", false}});
  CHECK(reason_of(r) == "out_of_order_chunk");
  CHECK(t.closed);
}

TEST_CASE("heartbeat timeout discards the open utterance") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);
  t.send(h, MessageType::UtteranceBegin, {{"utterance_id", "u-1"}});
  t.send(h, MessageType::UtteranceChunk,
         {{"utterance_id", "u-1"}, {"chunk_index", 0}, {"tokens", json::array({json::array({"half", 0.7})})}, {"is_last", false}});
  const auto r = t.absorb(h.on_heartbeat_timeout());
  CHECK(reason_of(r) == "timeout");
  CHECK(t.closed);
  CHECK(t.client.phase == wire::SessionPhase::Closed);
  CHECK(t.store.read_session_entries(t.client.session_id).entries.empty());
}

TEST_CASE("storage failure is reported and nothing is acknowledged") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);
  // A file where the date directory should be makes the append fail.
  std::filesystem::create_directories(t.dir / "data" / "logs");
  std::ofstream(t.dir / "data" / "logs" / "2025-01-01") << "blocker";
  const auto r = t.say(h, "u-1", {"crack"});
  REQUIRE(r.size() == 2);
  CHECK(r[0].type == MessageType::FinalTranscript);
  CHECK(r[1].type == MessageType::ProtocolError);
  CHECK(r[1].body["code"] == "storage");
  CHECK(t.closed);
}

TEST_CASE("session limit") {
  Harness t(1);
  SessionHandler a(t.services);
  t.open_session(a);
  CHECK(t.services.active_sessions == 1);

  // Second handler on the same services as `a`.
  SessionHandler b(t.services);
  wire::Sequencer seq;
  auto frame = [&](MessageType type, json body) {
    return wire::encode_message(seq.next(type, std::nullopt, t.now, std::move(body)));
  };
  b.on_frame(frame(MessageType::Auth, {{"token", t.token()}}));
  const auto out = b.on_frame(frame(MessageType::SessionStart, json::object()));
  CHECK(wire::decode_message(out.frames.at(0)).body["code"] == "max_sessions");

  a.on_disconnect();
  CHECK(t.services.active_sessions == 0);
}

TEST_CASE("SessionEnd reports the committed count and closes") {
  Harness t;
  SessionHandler h(t.services);
  t.open_session(h);
  t.say(h, "u-1", {"one"});
  t.say(h, "u-2", {"two"});
  const auto r = t.send(h, MessageType::SessionEnd);
  REQUIRE(r.size() == 1);
  CHECK(r[0].type == MessageType::SessionClosed);
  CHECK(r[0].body["entries_committed"] == 2);
  CHECK(t.closed);
}

TEST_CASE("sessions on one service are isolated") {
  Harness t;
  SessionHandler a(t.services);
  SessionHandler b(t.services);
  wire::Sequencer sa, sb;
  wire::SessionState ca, cb;
  auto drive = [&](SessionHandler& h, wire::Sequencer& s, wire::SessionState& c, MessageType type, json body) {
    std::optional<std::string> sid;
    if (!c.session_id.empty()) sid = c.session_id;
    const auto msg = s.next(type, sid, t.now, std::move(body));
    c = wire::step_session_state(c, msg, wire::Direction::ClientToServer).state;
    for (const auto& f : h.on_frame(wire::encode_message(msg)).frames)
      c = wire::step_session_state(c, wire::decode_message(f), wire::Direction::ServerToClient).state;
  };
  for (auto* p : {&a, &b}) {
    auto& s = p == &a ? sa : sb;
    auto& c = p == &a ? ca : cb;
    drive(*p, s, c, MessageType::Auth, {{"token", t.token()}});
    drive(*p, s, c, MessageType::SessionStart, json::object());
  }
  CHECK(ca.session_id != cb.session_id);
  // Interleave two utterances.
  drive(a, sa, ca, MessageType::UtteranceBegin, {{"utterance_id", "x"}});
  drive(b, sb, cb, MessageType::UtteranceBegin, {{"utterance_id", "x"}});
  drive(a, sa, ca, MessageType::UtteranceChunk,
        {{"utterance_id", "x"}, {"chunk_index", 0}, {"tokens", json::array({json::array({"alpha", 1.0})})}, {"is_last", false}});
  drive(b, sb, cb, MessageType::UtteranceChunk,
        {{"utterance_id", "x"}, {"chunk_index", 0}, {"tokens", json::array({json::array({"beta", 1.0})})}, {"is_last", false}});
  drive(b, sb, cb, MessageType::UtteranceEnd, {{"utterance_id", "x"}});
  drive(a, sa, ca, MessageType::UtteranceEnd, {{"utterance_id", "x"}});
  CHECK(t.store.read_session_entries(ca.session_id).entries.at(0).spoken_text == "alpha");
  CHECK(t.store.read_session_entries(cb.session_id).entries.at(0).spoken_text == "beta");
}

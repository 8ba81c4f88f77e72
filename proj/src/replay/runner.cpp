#include "hfm/replay/runner.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <thread>

#include "hfm/log_pipeline.hpp"

namespace hfm::replay {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

Endpoint parse_endpoint(std::string_view address) {
  for (const std::string_view scheme : {"http://", "ws://"}) {
    if (address.substr(0, scheme.size()) == scheme) address.remove_prefix(scheme.size());
  }
  while (!address.empty() && address.back() == '/') address.remove_suffix(1);
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == address.size())
    throw std::invalid_argument("gateway address must be host:port, got '" + std::string(address) + "'");
  std::string host(address.substr(0, colon));
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  return {host, std::string(address.substr(colon + 1))};
}

namespace {

// Runs one async operation to completion on `ioc`, returning its error code.
template <class Start>
beast::error_code await(net::io_context& ioc, Start&& start) {
  beast::error_code result;
  bool done = false;
  start([&](beast::error_code ec, auto&&...) {
    result = ec;
    done = true;
  });
  ioc.restart();
  while (!done && ioc.run_one()) {
  }
  if (!done) return net::error::operation_aborted;
  return result;
}

// As await, but cancels the operation through `cancel` once `timeout` passes.
template <class Start, class Cancel>
beast::error_code await_for(net::io_context& ioc, std::chrono::milliseconds timeout, Cancel&& cancel,
                            Start&& start) {
  beast::error_code result;
  bool done = false;
  start([&](beast::error_code ec, auto&&...) {
    result = ec;
    done = true;
  });
  ioc.restart();
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!done && std::chrono::steady_clock::now() < deadline) {
    if (ioc.run_one_until(deadline) == 0 && ioc.stopped()) break;
  }
  if (done) return result;
  cancel();
  ioc.restart();
  while (!done && ioc.run_one()) {
  }
  return beast::error::timeout;
}

[[noreturn]] void connection_error(std::string_view what, const beast::error_code& ec) {
  throw ConnectionError(std::string(what) + ": " + ec.message());
}

void connect_stream(net::io_context& ioc, beast::tcp_stream& stream, const Endpoint& endpoint,
                    std::chrono::milliseconds timeout) {
  tcp::resolver resolver(ioc);
  beast::error_code ec;
  const auto results = resolver.resolve(endpoint.host, endpoint.port, ec);
  if (ec) connection_error("resolve " + endpoint.host, ec);
  stream.expires_after(timeout);
  ec = await(ioc, [&](auto handler) { stream.async_connect(results, std::move(handler)); });
  if (ec) connection_error("connect " + endpoint.host + ":" + endpoint.port, ec);
  stream.socket().set_option(tcp::no_delay(true), ec);
}

}  // namespace

HttpResult http_request(const Endpoint& endpoint, std::string_view method, std::string_view target,
                        std::string_view body, std::string_view bearer, std::chrono::milliseconds timeout) {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  connect_stream(ioc, stream, endpoint, timeout);

  http::request<http::string_body> req(http::string_to_verb({method.data(), method.size()}),
                                       {target.data(), target.size()}, 11);
  req.set(http::field::host, endpoint.host);
  req.set(http::field::content_type, "application/json");
  if (!bearer.empty()) req.set(http::field::authorization, "Bearer " + std::string(bearer));
  req.body() = std::string(body);
  req.keep_alive(false);
  req.prepare_payload();

  stream.expires_after(timeout);
  auto ec = await(ioc, [&](auto handler) { http::async_write(stream, req, std::move(handler)); });
  if (ec) connection_error("send request", ec);

  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  stream.expires_after(timeout);
  ec = await(ioc, [&](auto handler) { http::async_read(stream, buffer, res, std::move(handler)); });
  if (ec) connection_error("read response", ec);
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {res.result_int(), std::move(res.body())};
}

struct StreamClient::Impl {
  Impl(const Endpoint& endpoint, std::chrono::milliseconds timeout) : ws(ioc), timeout(timeout) {
    auto& lowest = beast::get_lowest_layer(ws);
    connect_stream(ioc, lowest, endpoint, timeout);
    lowest.expires_after(timeout);
    auto ec = await(ioc, [&](auto handler) {
      ws.async_handshake(endpoint.host + ":" + endpoint.port, "/api/v1/stream", std::move(handler));
    });
    if (ec) connection_error("websocket handshake", ec);
    lowest.expires_never();
    websocket::stream_base::timeout opt{timeout, websocket::stream_base::none(), false};
    ws.set_option(opt);
    ws.text(true);
  }

  net::io_context ioc;
  websocket::stream<beast::tcp_stream> ws;
  beast::flat_buffer buffer;
  std::chrono::milliseconds timeout;
  bool closed = false;
};

StreamClient::StreamClient(const Endpoint& endpoint, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>(endpoint, timeout)) {}

StreamClient::~StreamClient() {
  try {
    close();
  } catch (...) {
  }
}

void StreamClient::send_text(std::string_view text) {
  auto ec = await_for(impl_->ioc, impl_->timeout, [&] { beast::get_lowest_layer(impl_->ws).cancel(); }, [&](auto handler) {
    impl_->ws.async_write(net::buffer(text.data(), text.size()), std::move(handler));
  });
  if (ec) connection_error("websocket write", ec);
}

std::optional<std::string> StreamClient::receive_text() {
  if (impl_->closed) return std::nullopt;
  auto ec = await_for(impl_->ioc, impl_->timeout, [&] { beast::get_lowest_layer(impl_->ws).cancel(); },
                      [&](auto handler) { impl_->ws.async_read(impl_->buffer, std::move(handler)); });
  if (ec == websocket::error::closed || ec == net::error::eof || ec == net::error::connection_reset) {
    impl_->closed = true;
    return std::nullopt;
  }
  if (ec) connection_error("websocket read", ec);
  std::string text = beast::buffers_to_string(impl_->buffer.data());
  impl_->buffer.consume(impl_->buffer.size());
  return text;
}

void StreamClient::close() {
  if (!impl_ || impl_->closed) return;
  impl_->closed = true;
  if (!impl_->ws.is_open()) return;
  await_for(impl_->ioc, impl_->timeout, [&] { beast::get_lowest_layer(impl_->ws).close(); },
            [&](auto handler) { impl_->ws.async_close(websocket::close_code::normal, std::move(handler)); });
}

namespace {

struct SessionFailure {
  FailureKind kind;
  std::string message;
};

double elapsed_ms(SteadyClock::time_point from) {
  return std::chrono::duration<double, std::milli>(SteadyClock::now() - from).count();
}

void sleep_ms(int64_t ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

// Client half of a session: every frame in either direction is checked
// against the shared state machine.
class Driver {
 public:
  explicit Driver(StreamClient& client) : client_(client) {}

  void send(wire::MessageType type, json body) {
    std::optional<std::string> sid;
    if (!state_.session_id.empty()) sid = state_.session_id;
    auto msg = sequencer_.next(type, sid, system_clock()(), std::move(body));
    const auto step = wire::step_session_state(state_, msg, wire::Direction::ClientToServer);
    if (!step.allowed) throw SessionFailure{FailureKind::ProtocolViolation, "harness would send illegal " + name(type)};
    state_ = step.state;
    client_.send_text(wire::encode_message(msg));
  }

  wire::ProtocolMessage expect(wire::MessageType type) {
    auto frame = client_.receive_text();
    if (!frame) throw SessionFailure{FailureKind::ConnectionFailed, "gateway closed the stream awaiting " + name(type)};
    wire::ProtocolMessage msg;
    try {
      msg = wire::decode_message(*frame);
    } catch (const wire::WireError& e) {
      throw SessionFailure{FailureKind::ProtocolViolation, std::string("undecodable frame: ") + e.what()};
    }
    const auto step = wire::step_session_state(state_, msg, wire::Direction::ServerToClient);
    if (!step.allowed)
      throw SessionFailure{FailureKind::ProtocolViolation,
                           "illegal " + name(msg.type) + " in " + std::string(wire::to_string(state_.phase))};
    state_ = step.state;
    if (msg.type != type) {
      throw SessionFailure{FailureKind::ProtocolViolation,
                           "expected " + name(type) + ", got " + name(msg.type) + " " + msg.body.dump()};
    }
    return msg;
  }

  const wire::SessionState& state() const { return state_; }

 private:
  static std::string name(wire::MessageType type) { return std::string(wire::to_string(type)); }

  StreamClient& client_;
  wire::SessionState state_;
  wire::Sequencer sequencer_;
};

std::string utterance_id_for(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "u-%04zu", index + 1);
  return buf;
}

std::string obtain_token(const SessionScript& script, const Endpoint& gateway, const RunOptions& options) {
  const json body = {{"subject", script.operator_subject}, {"passphrase", script.passphrase}};
  const auto res = http_request(gateway, "POST", "/api/v1/auth/token", body.dump(), {}, options.io_timeout);
  if (res.status != 200)
    throw SessionFailure{FailureKind::ConnectionFailed,
                         "token request rejected with " + std::to_string(res.status) + ": " + res.body};
  return json::parse(res.body).at("token").get<std::string>();
}

void ensure_asset(const SessionScript& script, const Endpoint& gateway, const std::string& token,
                  const RunOptions& options) {
  const json asset = {{"asset_id", *script.asset_id},
                      {"asset_type", script.asset_type},
                      {"location", "replay"},
                      {"doc_refs", json::array()}};
  const auto res = http_request(gateway, "POST", "/api/v1/assets", asset.dump(), token, options.io_timeout);
  if (res.status != 201 && res.status != 409)
    throw SessionFailure{FailureKind::ConnectionFailed,
                         "asset registration failed with " + std::to_string(res.status) + ": " + res.body};
}

void drive(const SessionScript& script, const Endpoint& gateway, const RunOptions& options, SessionResult& result,
           std::string& token, std::vector<std::string>& mismatches) {
  token = obtain_token(script, gateway, options);
  if (script.asset_id) ensure_asset(script, gateway, token, options);

  StreamClient client(gateway, options.io_timeout);
  Driver driver(client);

  driver.send(wire::MessageType::Auth, {{"token", token}});
  driver.expect(wire::MessageType::AuthOk);
  driver.send(wire::MessageType::SessionStart, json::object());
  result.session_id = driver.expect(wire::MessageType::SessionStarted).body.at("session_id").get<std::string>();

  if (script.asset_id) {
    driver.send(wire::MessageType::AttachAssetMsg, {{"asset_id", *script.asset_id}});
    const auto reply = driver.expect(wire::MessageType::AttachAssetMsg);
    if (!reply.body.value("attached", false))
      throw SessionFailure{FailureKind::VerificationFailed, "gateway refused to attach " + *script.asset_id};
  }

  for (size_t i = 0; i < script.utterances.size(); ++i) {
    const auto& utt = script.utterances[i];
    UtteranceTiming timing;
    timing.utterance_id = utterance_id_for(i);
    sleep_ms(utt.delay_ms);

    driver.send(wire::MessageType::UtteranceBegin, {{"utterance_id", timing.utterance_id}});
    ++result.utterances_sent;
    for (size_t c = 0; c < utt.chunks.size(); ++c) {
      const auto& chunk = utt.chunks[c];
      sleep_ms(chunk.gap_ms);
      json tokens = json::array();
      for (const auto& t : chunk.tokens) tokens.push_back(json::array({t.text, t.confidence}));
      const auto sent = SteadyClock::now();
      driver.send(wire::MessageType::UtteranceChunk, {{"utterance_id", timing.utterance_id},
                                                      {"chunk_index", c},
                                                      {"tokens", std::move(tokens)},
                                                      {"is_last", c + 1 == utt.chunks.size()}});
      driver.expect(wire::MessageType::PartialTranscript);
      ++result.partials_received;
      if (c == 0) timing.first_partial_latency_ms = elapsed_ms(sent);
    }

    const auto end_sent = SteadyClock::now();
    driver.send(wire::MessageType::UtteranceEnd, {{"utterance_id", timing.utterance_id}});
    timing.final_text = driver.expect(wire::MessageType::FinalTranscript).body.at("text").get<std::string>();
    if (timing.final_text != utt.expected_final()) {
      mismatches.push_back(timing.utterance_id + ": expected final \"" + utt.expected_final() + "\", heard \"" +
                           timing.final_text + "\"");
    }
    if (!timing.final_text.empty()) {
      const auto commit = driver.expect(wire::MessageType::LogCommitted);
      timing.commit_latency_ms = elapsed_ms(end_sent);
      timing.entry_id = commit.body.at("entry_id").get<std::string>();
      ++result.commits_received;
    }
    result.utterances.push_back(std::move(timing));
  }

  driver.send(wire::MessageType::SessionEnd, json::object());
  const auto closed = driver.expect(wire::MessageType::SessionClosed);
  if (closed.body.value("entries_committed", uint64_t{0}) != result.commits_received) {
    throw SessionFailure{FailureKind::VerificationFailed,
                         "SessionClosed reports " + closed.body.value("entries_committed", json(0)).dump() +
                             " entries, " + std::to_string(result.commits_received) + " were acknowledged"};
  }
  client.close();
}

void verify_rest(const SessionScript& script, const Endpoint& gateway, const RunOptions& options,
                 const std::string& token, SessionResult& result) {
  const auto res = http_request(gateway, "GET", "/api/v1/sessions/" + result.session_id + "/entries", {}, token,
                                options.io_timeout);
  if (res.status != 200)
    throw SessionFailure{FailureKind::VerificationFailed, "entry read-back failed with " + std::to_string(res.status)};
  const auto entries = json::parse(res.body);

  std::vector<const UtteranceTiming*> committed;
  for (const auto& u : result.utterances)
    if (u.entry_id) committed.push_back(&u);
  if (entries.size() != committed.size()) {
    throw SessionFailure{FailureKind::VerificationFailed, "stored " + std::to_string(entries.size()) +
                                                              " entries, acknowledged " +
                                                              std::to_string(committed.size())};
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto entry = pipeline::entry_from_json(entries[i]);
    const auto& u = *committed[i];
    const auto idx = static_cast<size_t>(std::stoul(u.utterance_id.substr(2))) - 1;
    if (entry.entry_id != *u.entry_id || entry.entry_seq != i + 1 ||
        entry.spoken_text != script.utterances[idx].expected_final() || entry.spoken_text != u.final_text) {
      throw SessionFailure{FailureKind::VerificationFailed,
                           "entry " + entry.entry_id + " (\"" + entry.spoken_text + "\") does not match " +
                               u.utterance_id + " (\"" + script.utterances[idx].expected_final() + "\")"};
    }
    ++result.entries_verified;
  }
}

}  // namespace

SessionResult run_session(const SessionScript& script, const Endpoint& gateway, const RunOptions& options) {
  SessionResult result;
  std::string token;
  std::vector<std::string> mismatches;
  try {
    drive(script, gateway, options, result, token, mismatches);
    if (options.verify_rest) verify_rest(script, gateway, options, token, result);
    if (!mismatches.empty()) {
      std::string msg = mismatches.front();
      if (mismatches.size() > 1) msg += " (+" + std::to_string(mismatches.size() - 1) + " more)";
      throw SessionFailure{FailureKind::VerificationFailed, msg};
    }
  } catch (const SessionFailure& f) {
    result.failure = Failure{f.kind, f.message};
  } catch (const ConnectionError& e) {
    result.failure = Failure{FailureKind::ConnectionFailed, e.what()};
  } catch (const std::exception& e) {
    result.failure = Failure{FailureKind::ProtocolViolation, e.what()};
  }
  return result;
}

ReplayReport run_replay(const SessionScript& script, const Endpoint& gateway, const RunOptions& options,
                        const std::vector<Assertion>& assertions) {
  const size_t n = std::max<size_t>(options.parallel, 1);
  std::vector<SessionResult> results(n);
  if (n == 1) {
    results[0] = run_session(script, gateway, options);
  } else {
    std::vector<std::thread> workers;
    for (size_t i = 0; i < n; ++i)
      workers.emplace_back([&, i] { results[i] = run_session(script, gateway, options); });
    for (auto& w : workers) w.join();
  }
  return aggregate(std::move(results), assertions);
}

}  // namespace hfm::replay

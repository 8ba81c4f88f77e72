#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hfm/replay/report.hpp"
#include "hfm/replay/script.hpp"
#include "hfm/wire_protocol.hpp"

namespace hfm::replay {

/// Transport failure or timeout talking to the gateway.
class ConnectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host;
  std::string port;
};

/// Accepts "host:port", optionally prefixed with http:// or ws://.
Endpoint parse_endpoint(std::string_view address);

struct HttpResult {
  unsigned status = 0;
  std::string body;
};

/// One request on a fresh connection. Throws ConnectionError.
HttpResult http_request(const Endpoint& endpoint, std::string_view method, std::string_view target,
                        std::string_view body = {}, std::string_view bearer = {},
                        std::chrono::milliseconds timeout = std::chrono::seconds(10));

/// Blocking WebSocket client for the stream endpoint. Throws ConnectionError.
class StreamClient {
 public:
  StreamClient(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(10));
  ~StreamClient();
  StreamClient(const StreamClient&) = delete;
  StreamClient& operator=(const StreamClient&) = delete;

  void send_text(std::string_view text);
  /// Next frame; nullopt once the server has closed the connection.
  std::optional<std::string> receive_text();
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RunOptions {
  size_t parallel = 1;
  std::chrono::milliseconds io_timeout = std::chrono::seconds(10);
  bool verify_rest = true;
};

/// Drives one scripted session end to end and cross-checks the stored
/// entries over REST. Never throws for gateway misbehaviour.
SessionResult run_session(const SessionScript& script, const Endpoint& gateway, const RunOptions& options = {});

/// `options.parallel` independent sessions of the same script.
ReplayReport run_replay(const SessionScript& script, const Endpoint& gateway, const RunOptions& options = {},
                        const std::vector<Assertion>& assertions = {});

}  // namespace hfm::replay

#pragma once

#include <cstdint>
#include <memory>

#include "hfm/gateway/config.hpp"
#include "hfm/timestamp.hpp"

namespace hfm::gateway {

struct Services;

/// The running service: one listener serving REST routes and the
/// `/api/v1/stream` WebSocket on the same port.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config, Clock clock = system_clock());
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Recovers the store, binds and starts the I/O threads. Returns the bound port.
  uint16_t start();
  /// Blocks until SIGINT/SIGTERM or stop().
  void run_until_signalled();
  void stop();

  uint16_t port() const;
  Services& services();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hfm::gateway

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hfm::gateway {

struct HostPort {
  std::string host;
  uint16_t port = 0;
};

/// "host:port" or "[v6]:port". Port 0 asks the OS for a free port.
std::optional<HostPort> parse_host_port(const std::string& text);

struct GatewayConfig {
  std::string listen_address = "127.0.0.1:8080";
  std::filesystem::path data_dir;
  std::filesystem::path key_file;
  int64_t token_ttl_seconds = 3600;
  size_t max_sessions = 64;
  int64_t heartbeat_timeout_seconds = 30;
  // Shared passphrase for dev token issuance; empty disables the endpoint.
  std::string dev_passphrase;
  bool fsync = true;
  size_t io_threads = 4;
};

/// Checks values and makes sure data_dir exists and key_file is readable.
std::vector<std::string> prepare_config(const GatewayConfig& config);

}  // namespace hfm::gateway

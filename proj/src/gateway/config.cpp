#include "hfm/gateway/config.hpp"

#include <charconv>
#include <system_error>

namespace hfm::gateway {

std::optional<HostPort> parse_host_port(const std::string& text) {
  std::string host;
  std::string port_text;
  if (!text.empty() && text.front() == '[') {
    const auto close = text.find("]:");
    if (close == std::string::npos) return std::nullopt;
    host = text.substr(1, close - 1);
    port_text = text.substr(close + 2);
  } else {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) return std::nullopt;
    host = text.substr(0, colon);
    port_text = text.substr(colon + 1);
  }
  if (host.empty() || port_text.empty()) return std::nullopt;
  unsigned port = 0;
  const auto [end, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || end != port_text.data() + port_text.size() || port > 65535) return std::nullopt;
  return HostPort{host, static_cast<uint16_t>(port)};
}

std::vector<std::string> prepare_config(const GatewayConfig& config) {
  std::vector<std::string> problems;
  if (!parse_host_port(config.listen_address)) problems.push_back("listen address must be host:port");
  if (config.token_ttl_seconds <= 0) problems.emplace_back("token ttl must be positive");
  if (config.max_sessions == 0) problems.emplace_back("max sessions must be positive");
  if (config.heartbeat_timeout_seconds <= 0) problems.emplace_back("heartbeat timeout must be positive");
  if (config.io_threads == 0) problems.emplace_back("io threads must be positive");
  if (config.data_dir.empty()) {
    problems.emplace_back("data dir is required");
  } else {
    std::error_code ec;
    std::filesystem::create_directories(config.data_dir, ec);
    if (ec) problems.push_back("cannot create data dir: " + ec.message());
  }
  if (config.key_file.empty()) {
    problems.emplace_back("key file is required");
  } else if (!std::filesystem::is_regular_file(config.key_file)) {
    problems.push_back("key file not found: " + config.key_file.string());
  }
  return problems;
}

}  // namespace hfm::gateway

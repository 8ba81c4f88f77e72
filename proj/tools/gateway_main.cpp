#include <signal.h>
#include <sys/stat.h>

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hfm/auth.hpp"
#include "hfm/crash_points.hpp"
#include "hfm/gateway/server.hpp"
#include "hfm/log_store.hpp"

namespace {

int serve(hfm::gateway::GatewayConfig config) {
  if (const auto problems = hfm::gateway::prepare_config(config); !problems.empty()) {
    for (const auto& p : problems) std::cerr << "gateway: " << p << "\n";
    return 2;
  }
  hfm::crash::arm_from_environment();
  const auto host = hfm::gateway::parse_host_port(config.listen_address)->host;
  hfm::gateway::Gateway gateway(std::move(config));
  const auto port = gateway.start();
  std::cout << "listening on " << host << ":" << port << std::endl;
  gateway.run_until_signalled();
  std::cerr << "gateway: shutting down\n";
  return 0;
}

int keygen(const std::string& out) {
  const auto key = hfm::auth::SigningKey::generate();
  if (out == "-") {
    std::cout << key.to_hex() << "\n";
    return 0;
  }
  std::ofstream file(out, std::ios::trunc);
  if (!file) {
    std::cerr << "gateway: cannot write " << out << "\n";
    return 1;
  }
  file << key.to_hex() << "\n";
  file.close();
  ::chmod(out.c_str(), 0600);
  std::cerr << "wrote key " << key.key_id() << " to " << out << "\n";
  return 0;
}

int fsck(const std::string& data_dir, bool repair) {
  hfm::store::LogStore store(data_dir);
  if (repair) {
    const auto r = store.recover();
    std::cout << "recovered: " << r.temp_files_removed << " temp files removed, " << r.entries_reindexed
              << " entries reindexed, " << r.torn_index_lines_dropped << " torn index lines dropped\n";
  }
  const auto report = store.fsck();
  for (const auto& p : report.problems) std::cout << "problem: " << p << "\n";
  std::cout << report.entries << " entries, " << (report.clean() ? "clean" : "NOT clean") << "\n";
  return report.clean() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maintenance-logging gateway"};
  app.require_subcommand(1);

  hfm::gateway::GatewayConfig config;
  bool no_fsync = false;
  auto* serve_cmd = app.add_subcommand("serve", "Run the REST and stream service");
  serve_cmd->add_option("--listen", config.listen_address, "host:port (port 0 picks a free port)")
      ->envname("HFM_LISTEN")
      ->capture_default_str();
  serve_cmd->add_option("--data-dir", config.data_dir, "Log store and asset registry root")
      ->envname("HFM_DATA_DIR")
      ->required();
  serve_cmd->add_option("--key-file", config.key_file, "File holding the 64-hex-char signing key")
      ->envname("HFM_KEY_FILE")
      ->required();
  serve_cmd->add_option("--token-ttl", config.token_ttl_seconds, "Lifetime of issued tokens in seconds")
      ->envname("HFM_TOKEN_TTL")
      ->capture_default_str();
  serve_cmd->add_option("--max-sessions", config.max_sessions, "Concurrent stream sessions")
      ->envname("HFM_MAX_SESSIONS")
      ->capture_default_str();
  serve_cmd->add_option("--heartbeat-timeout", config.heartbeat_timeout_seconds, "Idle seconds before a stream is closed")
      ->envname("HFM_HEARTBEAT_TIMEOUT")
      ->capture_default_str();
  serve_cmd->add_option("--passphrase", config.dev_passphrase, "Shared passphrase for dev token issuance (empty disables)")
      ->envname("HFM_PASSPHRASE");
  serve_cmd->add_option("--threads", config.io_threads, "I/O threads")->capture_default_str();
  serve_cmd->add_flag("--no-fsync", no_fsync, "Skip fsync (tests only)");

  std::string key_out = "-";
  auto* keygen_cmd = app.add_subcommand("keygen", "Generate a signing key");
  keygen_cmd->add_option("--out", key_out, "Destination file, '-' for stdout")->capture_default_str();

  std::string fsck_dir;
  bool repair = false;
  auto* fsck_cmd = app.add_subcommand("fsck", "Check a data directory");
  fsck_cmd->add_option("--data-dir", fsck_dir)->envname("HFM_DATA_DIR")->required();
  fsck_cmd->add_flag("--repair", repair, "Run crash recovery first");

  CLI11_PARSE(app, argc, argv);
  ::signal(SIGPIPE, SIG_IGN);

  try {
    if (*serve_cmd) {
      config.fsync = !no_fsync;
      return serve(std::move(config));
    }
    if (*keygen_cmd) return keygen(key_out);
    if (*fsck_cmd) return fsck(fsck_dir, repair);
  } catch (const std::exception& e) {
    std::cerr << "gateway: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

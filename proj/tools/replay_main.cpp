#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hfm/replay/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Replay scripted inspection sessions against a gateway"};
  app.require_subcommand(1);

  std::string script_path;
  std::string gateway = "127.0.0.1:8080";
  size_t parallel = 1;
  std::vector<std::string> assertion_texts;
  std::string out_path;
  int timeout_ms = 10000;

  auto* run = app.add_subcommand("run", "Run a script and report latencies");
  run->add_option("--script", script_path, "Session script (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--gateway", gateway, "Gateway host:port")->envname("HFM_GATEWAY")->capture_default_str();
  run->add_option("--parallel", parallel, "Independent concurrent sessions")->check(CLI::PositiveNumber);
  run->add_option("--assert", assertion_texts, "e.g. p95_commit_ms<100 (repeatable)");
  run->add_option("--out", out_path, "Write the JSON report here");
  run->add_option("--timeout-ms", timeout_ms, "Per-operation I/O timeout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<hfm::replay::Assertion> assertions;
    for (const auto& text : assertion_texts) assertions.push_back(hfm::replay::parse_assertion(text));
    const auto script = hfm::replay::load_script(script_path);

    hfm::replay::RunOptions options;
    options.parallel = parallel;
    options.io_timeout = std::chrono::milliseconds(timeout_ms);
    const auto report = hfm::replay::run_replay(script, hfm::replay::parse_endpoint(gateway), options, assertions);

    const auto j = hfm::replay::to_json(report);
    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::trunc);
      out << j.dump(2) << "\n";
      if (!out) {
        std::cerr << "replay: cannot write " << out_path << "\n";
        return 2;
      }
    }

    std::cout << "utterances " << report.utterances_sent << ", partials " << report.partials_received
              << ", commits " << report.commits_received << ", failures " << report.failures << "\n";
    if (report.commit_ms) {
      std::cout << "commit latency ms: p50 " << report.commit_ms->p50 << ", p95 " << report.commit_ms->p95
                << ", max " << report.commit_ms->max << "\n";
    }
    if (report.first_partial_ms) {
      std::cout << "first partial ms:  p50 " << report.first_partial_ms->p50 << ", p95 "
                << report.first_partial_ms->p95 << ", max " << report.first_partial_ms->max << "\n";
    }
    for (const auto& s : report.sessions) {
      if (s.failure)
        std::cout << "session " << (s.session_id.empty() ? "?" : s.session_id) << " failed: "
                  << hfm::replay::to_string(s.failure->kind) << ": " << s.failure->message << "\n";
    }
    for (const auto& a : report.assertions) {
      std::cout << (a.passed ? "PASS " : "FAIL ") << a.assertion.text;
      if (a.observed) std::cout << " (observed " << *a.observed << ")";
      std::cout << "\n";
    }
    return report.passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "replay: " << e.what() << "\n";
    return 2;
  }
}

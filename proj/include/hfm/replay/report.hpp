#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hfm::replay {

struct LatencySummary {
  double p50 = 0;
  double p95 = 0;
  double max = 0;

  bool operator==(const LatencySummary&) const = default;
};

class EmptyInput : public std::invalid_argument {
 public:
  EmptyInput() : std::invalid_argument("no latency samples") {}
};

/// Nearest-rank order statistic: the ceil(q*n)-th smallest sample.
double nearest_rank(std::vector<double> samples, double q);

/// Throws EmptyInput.
LatencySummary summarize_latencies(const std::vector<double>& samples);

enum class FailureKind { ConnectionFailed, ProtocolViolation, VerificationFailed };

std::string_view to_string(FailureKind kind);

struct Failure {
  FailureKind kind;
  std::string message;
};

struct UtteranceTiming {
  std::string utterance_id;
  std::string final_text;
  std::optional<double> first_partial_latency_ms;
  std::optional<double> commit_latency_ms;
  std::optional<std::string> entry_id;
};

/// Outcome of one scripted session. Errors are reported here rather than
/// thrown so that everything acknowledged before a failure stays visible.
struct SessionResult {
  std::string session_id;
  std::vector<UtteranceTiming> utterances;
  size_t utterances_sent = 0;
  size_t partials_received = 0;
  size_t commits_received = 0;
  size_t entries_verified = 0;
  std::optional<Failure> failure;

  bool ok() const { return !failure; }
};

/// `metric op number`, e.g. `p95_commit_ms<100`.
struct Assertion {
  std::string metric;
  std::string op;
  double threshold = 0;
  std::string text;
};

/// Throws std::invalid_argument on unknown metrics or operators.
Assertion parse_assertion(std::string_view text);

struct AssertionResult {
  Assertion assertion;
  std::optional<double> observed;
  bool passed = false;
};

struct ReplayReport {
  std::vector<SessionResult> sessions;
  size_t utterances_sent = 0;
  size_t partials_received = 0;
  size_t commits_received = 0;
  size_t failures = 0;
  std::optional<LatencySummary> first_partial_ms;
  std::optional<LatencySummary> commit_ms;
  std::vector<AssertionResult> assertions;

  bool passed() const;
  std::optional<double> metric(std::string_view name) const;
};

ReplayReport aggregate(std::vector<SessionResult> sessions, const std::vector<Assertion>& assertions);

nlohmann::json to_json(const ReplayReport& report);

}  // namespace hfm::replay

#include "hfm/replay/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace hfm::replay {

using nlohmann::json;

double nearest_rank(std::vector<double> samples, double q) {
  if (samples.empty()) throw EmptyInput();
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  auto rank = static_cast<size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

LatencySummary summarize_latencies(const std::vector<double>& samples) {
  if (samples.empty()) throw EmptyInput();
  return {nearest_rank(samples, 0.50), nearest_rank(samples, 0.95),
          *std::max_element(samples.begin(), samples.end())};
}

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::ConnectionFailed: return "ConnectionFailed";
    case FailureKind::ProtocolViolation: return "ProtocolViolation";
    case FailureKind::VerificationFailed: return "VerificationFailed";
  }
  return "unknown";
}

namespace {

constexpr std::array<std::string_view, 10> kMetrics = {
    "p50_commit_ms",        "p95_commit_ms",        "max_commit_ms",
    "p50_first_partial_ms", "p95_first_partial_ms", "max_first_partial_ms",
    "failures",             "commits",              "utterances",
    "partials",
};

constexpr std::array<std::string_view, 5> kOps = {"<=", ">=", "==", "<", ">"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

json summary_json(const std::optional<LatencySummary>& s) {
  if (!s) return nullptr;
  return {{"p50", s->p50}, {"p95", s->p95}, {"max", s->max}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

Assertion parse_assertion(std::string_view text) {
  for (const auto op : kOps) {
    const auto pos = text.find(op);
    if (pos == std::string_view::npos) continue;
    Assertion a;
    a.text = std::string(text);
    a.metric = trim(text.substr(0, pos));
    a.op = std::string(op);
    const auto rhs = trim(text.substr(pos + op.size()));
    const auto [end, ec] = std::from_chars(rhs.data(), rhs.data() + rhs.size(), a.threshold);
    if (ec != std::errc() || end != rhs.data() + rhs.size() || rhs.empty())
      throw std::invalid_argument("assertion '" + a.text + "': bad number '" + rhs + "'");
    if (std::find(kMetrics.begin(), kMetrics.end(), a.metric) == kMetrics.end())
      throw std::invalid_argument("assertion '" + a.text + "': unknown metric '" + a.metric + "'");
    return a;
  }
  throw std::invalid_argument("assertion '" + std::string(text) + "': expected <metric><op><number>");
}

std::optional<double> ReplayReport::metric(std::string_view name) const {
  const auto pick = [](const std::optional<LatencySummary>& s, double LatencySummary::*field) -> std::optional<double> {
    if (!s) return std::nullopt;
    return (*s).*field;
  };
  if (name == "p50_commit_ms") return pick(commit_ms, &LatencySummary::p50);
  if (name == "p95_commit_ms") return pick(commit_ms, &LatencySummary::p95);
  if (name == "max_commit_ms") return pick(commit_ms, &LatencySummary::max);
  if (name == "p50_first_partial_ms") return pick(first_partial_ms, &LatencySummary::p50);
  if (name == "p95_first_partial_ms") return pick(first_partial_ms, &LatencySummary::p95);
  if (name == "max_first_partial_ms") return pick(first_partial_ms, &LatencySummary::max);
  if (name == "failures") return static_cast<double>(failures);
  if (name == "commits") return static_cast<double>(commits_received);
  if (name == "utterances") return static_cast<double>(utterances_sent);
  if (name == "partials") return static_cast<double>(partials_received);
  return std::nullopt;
}

bool ReplayReport::passed() const {
  if (failures != 0) return false;
  return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
}

ReplayReport aggregate(std::vector<SessionResult> sessions, const std::vector<Assertion>& assertions) {
  ReplayReport report;
  std::vector<double> partial_samples;
  std::vector<double> commit_samples;
  for (const auto& s : sessions) {
    report.utterances_sent += s.utterances_sent;
    report.partials_received += s.partials_received;
    report.commits_received += s.commits_received;
    if (s.failure) ++report.failures;
    for (const auto& u : s.utterances) {
      if (u.first_partial_latency_ms) partial_samples.push_back(*u.first_partial_latency_ms);
      if (u.commit_latency_ms) commit_samples.push_back(*u.commit_latency_ms);
    }
  }
  if (!partial_samples.empty()) report.first_partial_ms = summarize_latencies(partial_samples);
  if (!commit_samples.empty()) report.commit_ms = summarize_latencies(commit_samples);
  report.sessions = std::move(sessions);

  for (const auto& a : assertions) {
    AssertionResult r{a, report.metric(a.metric), false};
    if (r.observed) {
      const double v = *r.observed;
      if (a.op == "<") r.passed = v < a.threshold;
      else if (a.op == "<=") r.passed = v <= a.threshold;
      else if (a.op == ">") r.passed = v > a.threshold;
      else if (a.op == ">=") r.passed = v >= a.threshold;
      else if (a.op == "==") r.passed = v == a.threshold;
    }
    report.assertions.push_back(std::move(r));
  }
  return report;
}

json to_json(const ReplayReport& report) {
  json sessions = json::array();
  for (const auto& s : report.sessions) {
    json utterances = json::array();
    for (const auto& u : s.utterances) {
      utterances.push_back({{"utterance_id", u.utterance_id},
                            {"final_text", u.final_text},
                            {"first_partial_latency_ms", optional_json(u.first_partial_latency_ms)},
                            {"commit_latency_ms", optional_json(u.commit_latency_ms)},
                            {"entry_id", u.entry_id ? json(*u.entry_id) : json(nullptr)}});
    }
    json failure = nullptr;
    if (s.failure) failure = {{"kind", to_string(s.failure->kind)}, {"message", s.failure->message}};
    sessions.push_back({{"session_id", s.session_id},
                        {"utterances_sent", s.utterances_sent},
                        {"partials_received", s.partials_received},
                        {"commits_received", s.commits_received},
                        {"entries_verified", s.entries_verified},
                        {"failure", std::move(failure)},
                        {"utterances", std::move(utterances)}});
  }
  json assertions = json::array();
  for (const auto& a : report.assertions) {
    assertions.push_back({{"assertion", a.assertion.text},
                          {"observed", optional_json(a.observed)},
                          {"passed", a.passed}});
  }
  return {{"utterances_sent", report.utterances_sent},
          {"partials_received", report.partials_received},
          {"commits_received", report.commits_received},
          {"failures", report.failures},
          {"first_partial_latency_ms", summary_json(report.first_partial_ms)},
          {"commit_latency_ms", summary_json(report.commit_ms)},
          {"assertions", std::move(assertions)},
          {"passed", report.passed()},
          {"sessions", std::move(sessions)}};
}

}  // namespace hfm::replay

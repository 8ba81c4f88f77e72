#include "protocol_checks.hpp"

#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "messages.hpp"

namespace hfm::testing {

using wire::Direction;
using wire::MessageType;
using wire::SessionPhase;
using wire::SessionState;

std::string state_label(const SessionState& s) {
  switch (s.phase) {
    case SessionPhase::AwaitingAuth: return "AwaitingAuth";
    case SessionPhase::Ready: return "Ready";
    case SessionPhase::Dictating: return "Dictating";
    case SessionPhase::Closed: return "Closed";
    case SessionPhase::Active:
      if (!s.pending_utterance_id) return "Active";
      return s.pending_final_sent ? "ActivePendingCommit" : "ActivePendingFinal";
  }
  return "?";
}

std::vector<std::string> all_state_labels() {
  return {"AwaitingAuth", "Ready", "Active", "ActivePendingFinal", "ActivePendingCommit", "Dictating", "Closed"};
}

SessionState state_for_label(const std::string& label) {
  SessionState s;
  s.last_client_seq = 3;
  s.last_server_seq = 2;
  if (label == "AwaitingAuth") return s;
  s.operator_subject = "tech-01";
  s.phase = SessionPhase::Ready;
  if (label == "Ready") return s;
  s.session_id = "s-1";
  s.phase = SessionPhase::Active;
  if (label == "Active") return s;
  if (label == "ActivePendingFinal" || label == "ActivePendingCommit") {
    s.pending_utterance_id = "u-1";
    s.pending_final_sent = label == "ActivePendingCommit";
    return s;
  }
  if (label == "Dictating") {
    s.phase = SessionPhase::Dictating;
    s.current_utterance_id = "u-1";
    return s;
  }
  if (label == "Closed") {
    s.phase = SessionPhase::Closed;
    return s;
  }
  throw std::invalid_argument("unknown state label " + label);
}

namespace {

std::string dir_label(Direction d) { return d == Direction::ClientToServer ? "c2s" : "s2c"; }

using Key = std::tuple<std::string, std::string, std::string>;

std::map<Key, std::string> load_golden(const std::filesystem::path& path, std::vector<std::string>& problems) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<Key, std::string> table;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string state, type, dir, next, extra;
    if (!(fields >> state)) continue;
    if (!(fields >> type >> dir >> next) || (fields >> extra)) {
      problems.push_back("golden line " + std::to_string(lineno) + " malformed");
      continue;
    }
    if (!table.emplace(Key{state, type, dir}, next).second)
      problems.push_back("golden line " + std::to_string(lineno) + " duplicates a triple");
  }
  return table;
}

}  // namespace

TableCheck check_transition_table(const std::filesystem::path& golden) {
  TableCheck result;
  const auto table = load_golden(golden, result.mismatches);
  size_t golden_matched = 0;
  for (const auto& label : all_state_labels()) {
    const auto state = state_for_label(label);
    for (const auto type : wire::kAllMessageTypes) {
      for (const auto dir : {Direction::ClientToServer, Direction::ServerToClient}) {
        ++result.triples;
        const auto msg = next_message(state, type, dir);
        const auto step = wire::step_session_state(state, msg, dir);
        const Key key{label, std::string(wire::to_string(type)), dir_label(dir)};
        const auto it = table.find(key);
        const std::string where = label + " " + std::get<1>(key) + " " + std::get<2>(key);
        if (it == table.end()) {
          if (step.allowed) result.mismatches.push_back(where + ": allowed but not in golden table");
          else if (!(step.state == state)) result.mismatches.push_back(where + ": rejected but state changed");
          continue;
        }
        ++golden_matched;
        if (!step.allowed) {
          result.mismatches.push_back(where + ": golden says legal, rejected");
          continue;
        }
        ++result.legal;
        if (state_label(step.state) != it->second)
          result.mismatches.push_back(where + ": next " + state_label(step.state) + ", golden " + it->second);
      }
    }
  }
  if (golden_matched != table.size())
    result.mismatches.push_back("golden table names states or types that do not exist");
  return result;
}

FuzzResult fuzz_transitions(size_t sequences, uint64_t seed) {
  FuzzResult result;
  std::mt19937_64 rng(seed);
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };
  const std::array<Direction, 2> dirs = {Direction::ClientToServer, Direction::ServerToClient};

  for (size_t n = 0; n < sequences; ++n) {
    ++result.sequences;
    SessionState state;
    bool closed = false;
    size_t utterance_counter = 0;
    const size_t length = 1 + rng() % 80;
    for (size_t i = 0; i < length; ++i) {
      ++result.steps;
      std::string uid = state.current_utterance_id   ? *state.current_utterance_id
                        : state.pending_utterance_id ? *state.pending_utterance_id
                                                     : "u-" + std::to_string(++utterance_counter);
      if (chance(0.05)) uid = "u-" + std::to_string(rng() % 4);

      wire::ProtocolMessage msg;
      Direction dir{};
      if (chance(0.5)) {
        // Closing messages are legal almost everywhere; taking them rarely
        // lets sequences reach the deeper states.
        std::vector<std::pair<MessageType, Direction>> legal, closing;
        for (const auto type : wire::kAllMessageTypes)
          for (const auto d : dirs) {
            const auto t = wire::step_session_state(state, next_message(state, type, d, uid), d);
            if (!t.allowed) continue;
            (t.state.phase == SessionPhase::Closed ? closing : legal).emplace_back(type, d);
          }
        if (legal.empty() || chance(0.1)) legal.insert(legal.end(), closing.begin(), closing.end());
        if (legal.empty()) {
          const auto pick = wire::kAllMessageTypes[rng() % wire::kAllMessageTypes.size()];
          dir = dirs[rng() % 2];
          msg = next_message(state, pick, dir, uid);
        } else {
          const auto [type, d] = legal[rng() % legal.size()];
          dir = d;
          msg = next_message(state, type, dir, uid);
        }
      } else {
        dir = dirs[rng() % 2];
        msg = next_message(state, wire::kAllMessageTypes[rng() % wire::kAllMessageTypes.size()], dir, uid);
        if (chance(0.1)) msg.seq += 1 + rng() % 3;
        if (chance(0.05)) msg.seq = 0;
        if (chance(0.1)) msg.session_id = "s-" + std::to_string(rng() % 3);
        if (chance(0.05)) msg.session_id.reset();
        if (chance(0.05)) msg.version = static_cast<int>(rng() % 3);
        if (chance(0.1)) msg.body = sample_body(wire::kAllMessageTypes[rng() % 16], uid);
        if (chance(0.05)) msg.body = nlohmann::json::array();
      }
      // Empty finals exercise the no-commit path.
      if (msg.type == MessageType::FinalTranscript && msg.body.is_object() && chance(0.2)) msg.body["text"] = "";

      wire::Transition step;
      try {
        step = wire::step_session_state(state, msg, dir);
      } catch (const std::exception& e) {
        result.problems.push_back(std::string("step threw: ") + e.what());
        break;
      }
      if (closed && (step.allowed || step.state.phase != SessionPhase::Closed)) {
        result.problems.push_back("escaped Closed via " + std::string(wire::to_string(msg.type)));
        break;
      }
      if (!step.allowed && !(step.state == state)) {
        result.problems.push_back("rejected step changed state");
        break;
      }
      const auto& s = step.state;
      if (s.current_utterance_id.has_value() != (s.phase == SessionPhase::Dictating))
        result.problems.push_back("current utterance set outside Dictating");
      if (s.pending_utterance_id && s.phase != SessionPhase::Active)
        result.problems.push_back("pending utterance outside Active");
      if (s.last_client_seq < state.last_client_seq || s.last_server_seq < state.last_server_seq)
        result.problems.push_back("seq went backwards");
      if (!result.problems.empty()) break;

      if (step.allowed) ++result.accepted;
      state = step.state;
      if (state.phase == SessionPhase::Closed && !closed) {
        closed = true;
        ++result.reached_closed;
      }
    }
    if (!result.problems.empty()) break;
  }
  return result;
}

}  // namespace hfm::testing

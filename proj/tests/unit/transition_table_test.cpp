#include "doctest.h"
#include "messages.hpp"
#include "protocol_checks.hpp"

using namespace hfm::testing;

TEST_CASE("transition function matches the golden table exhaustively") {
  const auto result = check_transition_table(std::string(HFM_TEST_DATA) + "/transition_table.golden");
  CHECK(result.triples == 7 * 16 * 2);
  CHECK(result.legal > 0);
  for (const auto& m : result.mismatches) FAIL_CHECK(m);
}

TEST_CASE("Closed absorbs every message") {
  const auto closed = state_for_label("Closed");
  for (const auto type : hfm::wire::kAllMessageTypes) {
    for (const auto dir : {hfm::wire::Direction::ClientToServer, hfm::wire::Direction::ServerToClient}) {
      const auto step = hfm::wire::step_session_state(closed, next_message(closed, type, dir), dir);
      CHECK_FALSE(step.allowed);
      CHECK(step.state == closed);
    }
  }
}

TEST_CASE("state labels round trip") {
  for (const auto& label : all_state_labels()) CHECK(state_label(state_for_label(label)) == label);
}

TEST_CASE("10,000 random sequences never throw or escape Closed") {
  const auto result = fuzz_transitions(10'000, 7);
  CHECK(result.sequences == 10'000);
  CHECK(result.reached_closed > 100);
  CHECK(result.accepted > result.steps / 4);
  for (const auto& p : result.problems) FAIL_CHECK(p);
}

#include "doctest.h"
#include "grammar_checks.hpp"
#include "hfm/command_grammar.hpp"

using namespace hfm::grammar;

TEST_CASE("normalization") {
  CHECK(normalize_text("  Begin   Inspection. ") == "begin inspection");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("SEVERITY HIGH") == "severity high");
  CHECK(normalize_text("crack ?!") == "crack");
  CHECK(normalize_text("a\t\nb") == "a b");
  CHECK(normalize_text("...") == "");
  CHECK(normalize_text("ÄBC") == "Äbc");
}

TEST_CASE("grammar literals") {
  CHECK(parse_utterance("begin inspection") == Intent::begin_inspection());
  CHECK(parse_utterance("end report") == Intent::end_inspection());
  CHECK(parse_utterance("cancel") == Intent::cancel());
  CHECK(parse_utterance("severity critical") == Intent::set_severity(Severity::Critical));
  CHECK(parse_utterance("attach asset rail 42") == Intent::attach_asset("RAIL-42"));
}

TEST_CASE("dictation is the default and keeps the original text") {
  CHECK(parse_utterance("visible crack on left rail") == Intent::log_finding("visible crack on left rail"));
  CHECK(parse_utterance("severity extreme") == Intent::log_finding("severity extreme"));
  CHECK(parse_utterance("  Crack, LEFT rail. ") == Intent::log_finding("Crack, LEFT rail."));
}

TEST_CASE("empty utterances") {
  CHECK_THROWS_AS(parse_utterance(""), EmptyUtterance);
  CHECK_THROWS_AS(parse_utterance("   "), EmptyUtterance);
  CHECK_THROWS_AS(parse_utterance(" ?! "), EmptyUtterance);
}

TEST_CASE("asset codes") {
  CHECK(is_asset_code("RAIL-42"));
  CHECK(is_asset_code("A"));
  CHECK_FALSE(is_asset_code(""));
  CHECK_FALSE(is_asset_code("rail-42"));
  CHECK_FALSE(is_asset_code("RAIL--42"));
  CHECK_FALSE(is_asset_code("-RAIL"));
  CHECK_FALSE(is_asset_code("RAIL-"));
}

TEST_CASE("intent json round trip and validation") {
  for (const auto& intent : {Intent::begin_inspection(), Intent::end_inspection(), Intent::cancel(),
                             Intent::log_finding("x"), Intent::set_severity(Severity::Low),
                             Intent::attach_asset("PUMP-7")}) {
    CHECK(intent_from_json(to_json(intent)) == intent);
  }
  CHECK_THROWS(intent_from_json({{"kind", "AttachAsset"}, {"payload", {{"code", "bad code"}}}}));
  CHECK_THROWS(intent_from_json({{"kind", "Cancel"}, {"payload", {{"text", "x"}}}}));
  CHECK_THROWS(intent_from_json({{"kind", "Dance"}}));
  CHECK_FALSE(is_valid(Intent{IntentKind::LogFinding, FindingPayload{""}}));
}

TEST_CASE("labelled corpus agrees completely") {
  const auto result = hfm::testing::check_grammar_corpus(std::string(HFM_TEST_DATA) + "/grammar_corpus.json");
  CHECK(result.cases >= 30);
  for (const auto& d : result.disagreements) FAIL_CHECK(d);
  CHECK(result.agreed == result.cases);
}

TEST_CASE("fuzzed Unicode input never raises") {
  const auto result = hfm::testing::fuzz_grammar(20'000, 99);
  CHECK(result.inputs == 20'000);
  for (const auto& p : result.problems) FAIL_CHECK(p);
}

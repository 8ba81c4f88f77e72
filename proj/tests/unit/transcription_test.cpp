#include "doctest.h"
#include "hfm/transcription.hpp"

using namespace hfm::transcription;

namespace {

UtteranceChunk chunk(const std::string& id, uint32_t index, std::vector<Token> tokens, bool last = false) {
  return {id, index, std::move(tokens), last};
}

}  // namespace

TEST_CASE("confidence rounding is half-up at three decimals") {
  CHECK(round_confidence(0.1234) == doctest::Approx(0.123));
  CHECK(round_confidence(0.1235) == doctest::Approx(0.124));
  CHECK(round_confidence(0.8125) == doctest::Approx(0.813));
  CHECK(round_confidence(1.0) == 1.0);
  CHECK(round_confidence(0.0) == 0.0);
}

TEST_CASE("each chunk yields one partial with the accumulated text") {
  ScriptedProvider p;
  p.open_utterance("u1");
  auto h = p.feed_chunk(chunk("u1", 0, {{"crack", 0.9}}));
  REQUIRE(h.size() == 1);
  CHECK(h[0].kind == HypothesisKind::Partial);
  CHECK(h[0].text == "crack");
  CHECK(h[0].hypothesis_index == 0);
  h = p.feed_chunk(chunk("u1", 1, {{"detected", 0.8}}));
  CHECK(h[0].text == "crack detected");
  CHECK(h[0].confidence == doctest::Approx(0.85));
  CHECK(h[0].hypothesis_index == 1);

  const auto final = p.close_utterance("u1");
  CHECK(final.kind == HypothesisKind::Final);
  CHECK(final.text == "crack detected");
  CHECK(final.hypothesis_index == 2);
  CHECK_FALSE(p.is_open("u1"));
}

TEST_CASE("last chunk also emits the final and releases the utterance") {
  ScriptedProvider p;
  p.open_utterance("u1");
  const auto h = p.feed_chunk(chunk("u1", 0, {{"leak", 0.95}}, true));
  REQUIRE(h.size() == 2);
  CHECK(h[0].kind == HypothesisKind::Partial);
  CHECK(h[1].kind == HypothesisKind::Final);
  CHECK(h[1].text == "leak");
  CHECK_FALSE(p.is_open("u1"));
}

TEST_CASE("an utterance without tokens finalizes empty") {
  ScriptedProvider p;
  p.open_utterance("u1");
  const auto f = p.close_utterance("u1");
  CHECK(f.text.empty());
  CHECK(f.confidence == 0.0);
}

TEST_CASE("errors") {
  ScriptedProvider p;
  p.open_utterance("u1");
  auto code_of = [&](auto&& fn) {
    try {
      fn();
    } catch (const TranscriptionError& e) {
      return e.code();
    }
    FAIL("no error");
    return TranscriptionErrc::InvalidChunk;
  };
  CHECK(code_of([&] { p.open_utterance("u1"); }) == TranscriptionErrc::DuplicateUtterance);
  CHECK(code_of([&] { p.feed_chunk(chunk("u2", 0, {})); }) == TranscriptionErrc::UnknownUtterance);
  CHECK(code_of([&] { p.feed_chunk(chunk("u1", 1, {})); }) == TranscriptionErrc::OutOfOrderChunk);
  CHECK(code_of([&] { p.feed_chunk(chunk("u1", 0, {{"two words", 0.5}})); }) == TranscriptionErrc::InvalidChunk);
  CHECK(code_of([&] { p.feed_chunk(chunk("u1", 0, {{"w", 1.5}})); }) == TranscriptionErrc::InvalidChunk);
  CHECK(code_of([&] { p.close_utterance("nope"); }) == TranscriptionErrc::UnknownUtterance);
  // A rejected chunk is not consumed.
  CHECK(p.feed_chunk(chunk("u1", 0, {{"ok", 0.5}}))[0].text == "ok");
  p.discard_utterance("u1");
  CHECK_FALSE(p.is_open("u1"));
}

TEST_CASE("utterances are independent") {
  ScriptedProvider p;
  p.open_utterance("a");
  p.open_utterance("b");
  p.feed_chunk(chunk("a", 0, {{"one", 1.0}}));
  p.feed_chunk(chunk("b", 0, {{"two", 0.5}}));
  CHECK(p.close_utterance("a").text == "one");
  CHECK(p.close_utterance("b").text == "two");
}

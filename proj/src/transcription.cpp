#include "hfm/transcription.hpp"

#include <cmath>

namespace hfm::transcription {

double round_confidence(double value) {
  // The epsilon absorbs binary representation error just below a half.
  return std::floor(value * 1000.0 + 0.5 + 1e-9) / 1000.0;
}

void ScriptedProvider::open_utterance(const std::string& utterance_id) {
  if (!open_.try_emplace(utterance_id).second)
    throw TranscriptionError(TranscriptionErrc::DuplicateUtterance,
                             "utterance already open: " + utterance_id);
}

TranscriptHypothesis ScriptedProvider::hypothesis(const std::string& id, Buffer& buffer,
                                                  HypothesisKind kind) const {
  TranscriptHypothesis h;
  h.utterance_id = id;
  h.kind = kind;
  h.hypothesis_index = buffer.next_hypothesis++;
  double sum = 0.0;
  for (size_t i = 0; i < buffer.tokens.size(); ++i) {
    if (i > 0) h.text += ' ';
    h.text += buffer.tokens[i].text;
    sum += buffer.tokens[i].confidence;
  }
  h.confidence = buffer.tokens.empty() ? 0.0 : round_confidence(sum / buffer.tokens.size());
  return h;
}

std::vector<TranscriptHypothesis> ScriptedProvider::feed_chunk(const UtteranceChunk& chunk) {
  auto it = open_.find(chunk.utterance_id);
  if (it == open_.end())
    throw TranscriptionError(TranscriptionErrc::UnknownUtterance,
                             "utterance not open: " + chunk.utterance_id);
  Buffer& buffer = it->second;
  if (chunk.chunk_index != buffer.next_chunk)
    throw TranscriptionError(TranscriptionErrc::OutOfOrderChunk,
                             "expected chunk " + std::to_string(buffer.next_chunk) + ", got " +
                                 std::to_string(chunk.chunk_index));
  for (const auto& token : chunk.tokens) {
    if (token.text.empty() || token.text.find(' ') != std::string::npos ||
        !(token.confidence >= 0.0 && token.confidence <= 1.0))
      throw TranscriptionError(TranscriptionErrc::InvalidChunk, "invalid token in chunk");
  }

  ++buffer.next_chunk;
  buffer.tokens.insert(buffer.tokens.end(), chunk.tokens.begin(), chunk.tokens.end());

  std::vector<TranscriptHypothesis> out;
  out.push_back(hypothesis(chunk.utterance_id, buffer, HypothesisKind::Partial));
  if (chunk.is_last) {
    out.push_back(hypothesis(chunk.utterance_id, buffer, HypothesisKind::Final));
    open_.erase(it);
  }
  return out;
}

TranscriptHypothesis ScriptedProvider::close_utterance(const std::string& utterance_id) {
  auto it = open_.find(utterance_id);
  if (it == open_.end())
    throw TranscriptionError(TranscriptionErrc::UnknownUtterance,
                             "utterance not open: " + utterance_id);
  auto final = hypothesis(utterance_id, it->second, HypothesisKind::Final);
  open_.erase(it);
  return final;
}

void ScriptedProvider::discard_utterance(const std::string& utterance_id) {
  open_.erase(utterance_id);
}

bool ScriptedProvider::is_open(const std::string& utterance_id) const {
  return open_.contains(utterance_id);
}

}  // namespace hfm::transcription

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfm::transcription {

struct Token {
  std::string text;
  double confidence = 0.0;

  bool operator==(const Token&) const = default;
};

struct UtteranceChunk {
  std::string utterance_id;
  uint32_t chunk_index = 0;
  std::vector<Token> tokens;
  bool is_last = false;
};

enum class HypothesisKind { Partial, Final };

struct TranscriptHypothesis {
  std::string utterance_id;
  HypothesisKind kind = HypothesisKind::Partial;
  std::string text;
  double confidence = 0.0;  // rounded to 3 decimals
  uint32_t hypothesis_index = 0;

  bool operator==(const TranscriptHypothesis&) const = default;
};

enum class TranscriptionErrc { DuplicateUtterance, UnknownUtterance, OutOfOrderChunk, InvalidChunk };

class TranscriptionError : public std::runtime_error {
 public:
  TranscriptionError(TranscriptionErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  TranscriptionErrc code() const noexcept { return code_; }

 private:
  TranscriptionErrc code_;
};

/// Round half-up to three decimals.
double round_confidence(double value);

/// Streaming recognizer boundary. Implementations are single-session and
/// externally synchronized.
class TranscriptionProvider {
 public:
  virtual ~TranscriptionProvider() = default;

  virtual void open_utterance(const std::string& utterance_id) = 0;
  /// Emits the partial for this chunk, followed by the final when the chunk
  /// is the last one. A finalized utterance is released.
  virtual std::vector<TranscriptHypothesis> feed_chunk(const UtteranceChunk& chunk) = 0;
  /// Finalizes whatever has been fed so far and releases the utterance.
  virtual TranscriptHypothesis close_utterance(const std::string& utterance_id) = 0;
  /// Drops an open utterance without emitting anything.
  virtual void discard_utterance(const std::string& utterance_id) = 0;
  virtual bool is_open(const std::string& utterance_id) const = 0;
};

/// Deterministic provider over pre-tokenized chunks: hypothesis text is the
/// buffered words joined by single spaces, confidence their rounded mean.
class ScriptedProvider final : public TranscriptionProvider {
 public:
  void open_utterance(const std::string& utterance_id) override;
  std::vector<TranscriptHypothesis> feed_chunk(const UtteranceChunk& chunk) override;
  TranscriptHypothesis close_utterance(const std::string& utterance_id) override;
  void discard_utterance(const std::string& utterance_id) override;
  bool is_open(const std::string& utterance_id) const override;

 private:
  struct Buffer {
    std::vector<Token> tokens;
    uint32_t next_chunk = 0;
    uint32_t next_hypothesis = 0;
  };

  TranscriptHypothesis hypothesis(const std::string& id, Buffer& buffer, HypothesisKind kind) const;

  std::map<std::string, Buffer> open_;
};

}  // namespace hfm::transcription

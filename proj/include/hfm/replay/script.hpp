#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hfm/transcription.hpp"
#include "json.hpp"

namespace hfm::replay {

struct ScriptChunk {
  int64_t gap_ms = 0;  // pause before this chunk is sent
  std::vector<transcription::Token> tokens;
};

struct ScriptUtterance {
  int64_t delay_ms = 0;  // pause before UtteranceBegin
  std::vector<ScriptChunk> chunks;
  // What the operator expects to hear back. Defaults to the spoken words.
  std::optional<std::string> expect_final;

  std::string spoken_text() const;
  std::string expected_final() const { return expect_final.value_or(spoken_text()); }
};

struct SessionScript {
  std::string operator_subject;
  std::string passphrase;
  std::optional<std::string> asset_id;
  std::string asset_type = "generic";
  std::vector<ScriptUtterance> utterances;
};

enum class ScriptErrc { ParseError, InvariantViolation, Unreadable };

class ScriptError : public std::runtime_error {
 public:
  ScriptError(ScriptErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ScriptErrc code() const noexcept { return code_; }

 private:
  ScriptErrc code_;
};

/// Throws ScriptError. Messages name the line for syntax errors and the
/// JSON pointer of the offending field otherwise.
SessionScript parse_script(std::string_view text);
SessionScript load_script(const std::filesystem::path& path);

nlohmann::json to_json(const SessionScript& script);

}  // namespace hfm::replay

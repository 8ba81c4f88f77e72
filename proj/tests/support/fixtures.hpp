#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hfm/replay/script.hpp"

namespace hfm::testing {

struct ScriptShape {
  size_t utterances = 5;
  uint64_t seed = 1;
  std::string operator_subject = "tech-01";
  std::optional<std::string> asset_id;
  int64_t delay_ms = 0;
  int64_t gap_ms = 0;
  bool commands = true;  // open with "begin inspection", sprinkle severities
};

/// Deterministic inspection session: dictated findings split into 1-3 word
/// chunks, every utterance with a non-empty final.
replay::SessionScript make_script(const ScriptShape& shape);

void write_script(const std::filesystem::path& path, const replay::SessionScript& script);

std::string read_file(const std::filesystem::path& path);

}  // namespace hfm::testing

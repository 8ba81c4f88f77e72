#include "fixtures.hpp"

#include <array>
#include <fstream>
#include <random>
#include <sstream>

#include "process.hpp"

namespace hfm::testing {

namespace {

constexpr std::array<const char*, 6> kDefects = {"crack", "corrosion", "wear", "loose bolt", "leak", "dent"};
constexpr std::array<const char*, 6> kPlaces = {"near weld", "on bracket", "at joint", "under flange",
                                                "beside pump", "on rail head"};
constexpr std::array<const char*, 4> kLevels = {"low", "medium", "high", "critical"};

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

}  // namespace

replay::SessionScript make_script(const ScriptShape& shape) {
  std::mt19937_64 rng(shape.seed);
  auto pick = [&](size_t n) { return static_cast<size_t>(rng() % n); };

  replay::SessionScript script;
  script.operator_subject = shape.operator_subject;
  script.passphrase = kTestPassphrase;
  script.asset_id = shape.asset_id;
  script.asset_type = "rail-segment";

  for (size_t i = 0; i < shape.utterances; ++i) {
    std::string text;
    if (shape.commands && i == 0) {
      text = "begin inspection";
    } else if (shape.commands && i % 7 == 3) {
      text = std::string("severity ") + kLevels[pick(kLevels.size())];
    } else {
      text = std::string(kDefects[pick(kDefects.size())]) + " detected " + kPlaces[pick(kPlaces.size())] + " " +
             std::to_string(1 + pick(40));
    }
    const auto words = split_words(text);

    replay::ScriptUtterance utt;
    utt.delay_ms = shape.delay_ms;
    for (size_t w = 0; w < words.size();) {
      replay::ScriptChunk chunk;
      chunk.gap_ms = shape.gap_ms;
      const size_t take = std::min(words.size() - w, 1 + pick(3));
      for (size_t k = 0; k < take; ++k, ++w)
        chunk.tokens.push_back({words[w], 0.80 + 0.01 * static_cast<double>(pick(20))});
      utt.chunks.push_back(std::move(chunk));
    }
    script.utterances.push_back(std::move(utt));
  }
  return script;
}

void write_script(const std::filesystem::path& path, const replay::SessionScript& script) {
  std::ofstream out(path, std::ios::trunc);
  out << replay::to_json(script).dump(2) << "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace hfm::testing

#include "hfm/replay/script.hpp"

#include <fstream>
#include <sstream>

namespace hfm::replay {

using nlohmann::json;

std::string ScriptUtterance::spoken_text() const {
  std::string text;
  for (const auto& chunk : chunks) {
    for (const auto& token : chunk.tokens) {
      if (!text.empty()) text += ' ';
      text += token.text;
    }
  }
  return text;
}

namespace {

[[noreturn]] void field_error(const std::string& pointer, const std::string& what) {
  throw ScriptError(ScriptErrc::ParseError, "field " + pointer + ": " + what);
}

[[noreturn]] void invariant_error(const std::string& pointer, const std::string& what) {
  throw ScriptError(ScriptErrc::InvariantViolation, "field " + pointer + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& pointer) {
  if (!obj.contains(key)) field_error(pointer + "/" + key, "missing");
  return obj.at(key);
}

std::string require_string(const json& obj, const std::string& key, const std::string& pointer) {
  const auto& v = require(obj, key, pointer);
  if (!v.is_string()) field_error(pointer + "/" + key, "expected a string");
  return v.get<std::string>();
}

int64_t optional_ms(const json& obj, const std::string& key, const std::string& pointer) {
  if (!obj.contains(key)) return 0;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) field_error(pointer + "/" + key, "expected an integer");
  const auto ms = v.get<int64_t>();
  if (ms < 0) invariant_error(pointer + "/" + key, "must be >= 0");
  return ms;
}

size_t line_of(std::string_view text, size_t byte) {
  size_t line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

ScriptChunk parse_chunk(const json& j, const std::string& pointer) {
  if (!j.is_object()) field_error(pointer, "expected an object");
  ScriptChunk chunk;
  chunk.gap_ms = optional_ms(j, "gap_ms", pointer);
  const auto& tokens = require(j, "tokens", pointer);
  if (!tokens.is_array()) field_error(pointer + "/tokens", "expected an array");
  for (size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    const auto tp = pointer + "/tokens/" + std::to_string(i);
    if (!t.is_array() || t.size() != 2 || !t[0].is_string() || !t[1].is_number())
      field_error(tp, "expected [word, confidence]");
    transcription::Token token{t[0].get<std::string>(), t[1].get<double>()};
    if (token.text.empty() || token.text.find_first_of(" \t\r\n") != std::string::npos)
      invariant_error(tp, "word must be non-empty without whitespace");
    if (!(token.confidence >= 0.0 && token.confidence <= 1.0)) invariant_error(tp, "confidence outside [0,1]");
    chunk.tokens.push_back(std::move(token));
  }
  return chunk;
}

}  // namespace

SessionScript parse_script(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScriptError(ScriptErrc::ParseError,
                      "line " + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) + ": " + e.what());
  }
  if (!doc.is_object()) field_error("", "script must be a JSON object");

  SessionScript script;
  script.operator_subject = require_string(doc, "operator", "");
  script.passphrase = require_string(doc, "passphrase", "");
  if (script.operator_subject.empty()) invariant_error("/operator", "must be non-empty");
  if (doc.contains("asset_id") && !doc["asset_id"].is_null()) script.asset_id = require_string(doc, "asset_id", "");
  if (doc.contains("asset_type")) script.asset_type = require_string(doc, "asset_type", "");

  const auto& utterances = require(doc, "utterances", "");
  if (!utterances.is_array()) field_error("/utterances", "expected an array");
  if (utterances.empty()) invariant_error("/utterances", "at least one utterance is required");
  for (size_t i = 0; i < utterances.size(); ++i) {
    const auto pointer = "/utterances/" + std::to_string(i);
    const auto& u = utterances[i];
    if (!u.is_object()) field_error(pointer, "expected an object");
    ScriptUtterance utt;
    utt.delay_ms = optional_ms(u, "delay_ms", pointer);
    const auto& chunks = require(u, "chunks", pointer);
    if (!chunks.is_array()) field_error(pointer + "/chunks", "expected an array");
    for (size_t c = 0; c < chunks.size(); ++c)
      utt.chunks.push_back(parse_chunk(chunks[c], pointer + "/chunks/" + std::to_string(c)));
    if (u.contains("expect_final")) utt.expect_final = require_string(u, "expect_final", pointer);
    script.utterances.push_back(std::move(utt));
  }
  return script;
}

SessionScript load_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScriptError(ScriptErrc::Unreadable, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_script(buf.str());
  } catch (const ScriptError& e) {
    throw ScriptError(e.code(), path.string() + ": " + e.what());
  }
}

json to_json(const SessionScript& script) {
  json utterances = json::array();
  for (const auto& u : script.utterances) {
    json chunks = json::array();
    for (const auto& c : u.chunks) {
      json tokens = json::array();
      for (const auto& t : c.tokens) tokens.push_back(json::array({t.text, t.confidence}));
      chunks.push_back({{"gap_ms", c.gap_ms}, {"tokens", std::move(tokens)}});
    }
    json uj = {{"delay_ms", u.delay_ms}, {"chunks", std::move(chunks)}};
    if (u.expect_final) uj["expect_final"] = *u.expect_final;
    utterances.push_back(std::move(uj));
  }
  json j = {{"operator", script.operator_subject},
            {"passphrase", script.passphrase},
            {"asset_type", script.asset_type},
            {"utterances", std::move(utterances)}};
  if (script.asset_id) j["asset_id"] = *script.asset_id;
  return j;
}

}  // namespace hfm::replay

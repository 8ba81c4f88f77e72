#include "schema_check.hpp"

#include <fstream>
#include <regex>
#include <stdexcept>

namespace hfm::testing {

using nlohmann::json;

namespace {

bool has_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  throw std::invalid_argument("unsupported schema type " + type);
}

const json& resolve(const json& root, const std::string& ref) {
  if (ref.rfind("#/", 0) != 0) throw std::invalid_argument("only local $ref supported: " + ref);
  return root.at(json::json_pointer(ref.substr(1)));
}

void check(const json& root, const json& schema, const json& v, const std::string& at, std::vector<std::string>& out) {
  if (schema.is_boolean()) {
    if (!schema.get<bool>()) out.push_back(at + ": schema false");
    return;
  }
  if (schema.contains("$ref")) {
    check(root, resolve(root, schema["$ref"].get<std::string>()), v, at, out);
  }
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) ok = has_type(v, t.get<std::string>());
    else
      for (const auto& alt : t) ok = ok || has_type(v, alt.get<std::string>());
    if (!ok) {
      out.push_back(at + ": expected type " + t.dump() + ", got " + v.type_name());
      return;
    }
  }
  if (schema.contains("const") && v != schema["const"]) out.push_back(at + ": expected " + schema["const"].dump());
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == v;
    if (!found) out.push_back(at + ": " + v.dump() + " not in " + schema["enum"].dump());
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (schema.contains("minLength") && s.size() < schema["minLength"].get<size_t>())
      out.push_back(at + ": shorter than minLength");
    if (schema.contains("pattern") &&
        !std::regex_search(s, std::regex(schema["pattern"].get<std::string>(), std::regex::ECMAScript)))
      out.push_back(at + ": \"" + s + "\" does not match " + schema["pattern"].get<std::string>());
  }
  if (v.is_number()) {
    const double d = v.get<double>();
    if (schema.contains("minimum") && d < schema["minimum"].get<double>()) out.push_back(at + ": below minimum");
    if (schema.contains("maximum") && d > schema["maximum"].get<double>()) out.push_back(at + ": above maximum");
  }
  if (v.is_object()) {
    if (schema.contains("required")) {
      for (const auto& r : schema["required"])
        if (!v.contains(r.get<std::string>())) out.push_back(at + ": missing required " + r.get<std::string>());
    }
    const json props = schema.value("properties", json::object());
    for (const auto& [key, value] : v.items()) {
      if (props.contains(key)) {
        check(root, props[key], value, at + "/" + key, out);
      } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
        out.push_back(at + ": unexpected property " + key);
      }
    }
  }
  if (schema.contains("oneOf")) {
    size_t matches = 0;
    for (const auto& alt : schema["oneOf"]) {
      std::vector<std::string> sub;
      check(root, alt, v, at, sub);
      if (sub.empty()) ++matches;
    }
    if (matches != 1) out.push_back(at + ": matches " + std::to_string(matches) + " oneOf branches, expected 1");
  }
}

}  // namespace

std::vector<std::string> schema_errors(const json& schema, const json& instance) {
  std::vector<std::string> out;
  check(schema, schema, instance, "", out);
  return out;
}

json load_schema(const std::string& file_name) {
  const std::string path = std::string(HFM_SCHEMA_DIR) + "/" + file_name;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema " + path);
  return json::parse(in);
}

}  // namespace hfm::testing

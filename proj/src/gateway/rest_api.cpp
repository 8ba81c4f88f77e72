#include "hfm/gateway/rest_api.hpp"

#include <openssl/crypto.h>

#include <cctype>
#include <iostream>

namespace hfm::gateway {

using nlohmann::json;

namespace {

HttpReply json_reply(unsigned status, const json& body) { return {status, body.dump()}; }

HttpReply error_reply(unsigned status, std::string_view code, std::string_view message) {
  return json_reply(status, json{{"error", code}, {"message", message}});
}

std::string percent_decode(std::string_view in, bool plus_is_space) {
  std::string out;
  out.reserve(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (c == '+' && plus_is_space) {
      out += ' ';
    } else if (c == '%' && i + 2 < in.size() &&
               std::isxdigit(static_cast<unsigned char>(in[i + 1])) &&
               std::isxdigit(static_cast<unsigned char>(in[i + 2]))) {
      out += static_cast<char>(std::stoi(std::string(in.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += c;
    }
  }
  return out;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (start <= path.size()) {
    size_t slash = path.find('/', start);
    if (slash == std::string::npos) slash = path.size();
    if (slash > start) parts.push_back(path.substr(start, slash - start));
    start = slash + 1;
  }
  return parts;
}

/// Accepts a full RFC 3339 timestamp, or a bare date meaning the start
/// (`end_of_day` false) or the last millisecond (true) of that day.
std::optional<Timestamp> parse_bound(const std::string& text, bool end_of_day) {
  if (auto t = parse_rfc3339(text)) return t;
  if (auto d = parse_date(text)) {
    Timestamp t{*d};
    return end_of_day ? t + std::chrono::days{1} - std::chrono::milliseconds{1} : t;
  }
  return std::nullopt;
}

json entries_json(const std::vector<pipeline::LogEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back(pipeline::to_json(e));
  return arr;
}

}  // namespace

ParsedTarget parse_target(std::string_view target) {
  ParsedTarget out;
  const auto q = target.find('?');
  out.path = percent_decode(target.substr(0, q), false);
  if (q == std::string_view::npos) return out;
  std::string_view query = target.substr(q + 1);
  while (!query.empty()) {
    const auto amp = query.find('&');
    const std::string_view pair = query.substr(0, amp);
    const auto eq = pair.find('=');
    const auto key = percent_decode(pair.substr(0, eq), true);
    const auto value = eq == std::string_view::npos ? std::string() : percent_decode(pair.substr(eq + 1), true);
    if (!key.empty()) out.query[key] = value;
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return out;
}

RestApi::RestApi(Services& services, std::string dev_passphrase, int64_t token_ttl_seconds)
    : services_(services), dev_passphrase_(std::move(dev_passphrase)), token_ttl_seconds_(token_ttl_seconds) {}

HttpReply RestApi::handle(std::string_view method, std::string_view target, std::string_view authorization,
                          std::string_view body) {
  const ParsedTarget parsed = parse_target(target);
  const auto parts = split_path(parsed.path);
  if (parts.size() < 2 || parts[0] != "api" || parts[1] != "v1") return error_reply(404, "not_found", "no such route");

  if (parts.size() == 4 && parts[2] == "auth" && parts[3] == "token") {
    if (method != "POST") return error_reply(405, "method_not_allowed", "use POST");
    return issue_token(body);
  }

  // Everything else needs a bearer token with the route's scope.
  const bool is_assets = parts.size() >= 3 && parts[2] == "assets";
  const bool is_write = method == "POST";
  std::string_view scope = auth::kScopeLogsRead;
  if (is_assets) scope = is_write ? auth::kScopeAssetsWrite : auth::kScopeAssetsRead;

  constexpr std::string_view kBearer = "Bearer ";
  if (!authorization.starts_with(kBearer)) return error_reply(401, "unauthorized", "bearer token required");
  try {
    const auto claims =
        auth::verify_token(authorization.substr(kBearer.size()), services_.key, unix_seconds(services_.now()));
    if (!claims.has_scope(scope)) return error_reply(403, "missing_scope", std::string(scope));
  } catch (const auth::AuthError& e) {
    return error_reply(401, auth_error_reason(e.code()), e.what());
  }

  if (parts.size() == 5 && parts[2] == "sessions" && parts[4] == "entries" && method == "GET")
    return session_entries(parts[3], parsed);
  if (parts.size() == 3 && parts[2] == "entries" && method == "GET") return query_entries(parsed);
  if (parts.size() == 3 && is_assets && method == "POST") return create_asset(body);
  if (parts.size() == 4 && is_assets && method == "GET") return get_asset(parts[3], parsed);
  return error_reply(404, "not_found", "no such route");
}

HttpReply RestApi::issue_token(std::string_view body) {
  if (dev_passphrase_.empty()) return error_reply(403, "disabled", "dev token issuance is disabled");
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    return error_reply(400, "bad_request", "body must be JSON");
  }
  if (!request.is_object() || !request.contains("subject") || !request["subject"].is_string() ||
      !request.contains("passphrase") || !request["passphrase"].is_string())
    return error_reply(400, "bad_request", "body needs subject and passphrase");
  const auto subject = request["subject"].get<std::string>();
  const auto passphrase = request["passphrase"].get<std::string>();
  if (subject.empty()) return error_reply(400, "bad_request", "subject is empty");
  if (passphrase.size() != dev_passphrase_.size() ||
      CRYPTO_memcmp(passphrase.data(), dev_passphrase_.data(), passphrase.size()) != 0)
    return error_reply(403, "bad_credentials", "wrong passphrase");

  std::set<std::string> scopes(auth::kKnownScopes.begin(), auth::kKnownScopes.end());
  const auto claims = auth::make_claims(subject, std::move(scopes), unix_seconds(services_.now()), token_ttl_seconds_);
  return json_reply(200, json{{"token", auth::issue_token(claims, services_.key)},
                              {"expires_at", claims.expires_at}});
}

HttpReply RestApi::session_entries(const std::string& session_id, const ParsedTarget& target) {
  store::SessionEntries result;
  if (const auto it = target.query.find("date"); it != target.query.end()) {
    const auto date = parse_date(it->second);
    if (!date) return error_reply(400, "bad_request", "date must be YYYY-MM-DD");
    result = services_.store.read_session_entries(session_id, *date);
  } else {
    result = services_.store.read_session_entries(session_id);
  }
  for (const auto& c : result.corrupt) std::cerr << "corrupt entry " << c.path << ": " << c.reason << "\n";
  return json_reply(200, entries_json(result.entries));
}

HttpReply RestApi::query_entries(const ParsedTarget& target) {
  store::QueryFilter filter;
  if (const auto it = target.query.find("asset"); it != target.query.end() && !it->second.empty())
    filter.asset_id = it->second;
  if (const auto it = target.query.find("from"); it != target.query.end() && !it->second.empty()) {
    filter.from = parse_bound(it->second, false);
    if (!filter.from) return error_reply(400, "bad_request", "from must be RFC 3339 or YYYY-MM-DD");
  }
  if (const auto it = target.query.find("to"); it != target.query.end() && !it->second.empty()) {
    filter.to = parse_bound(it->second, true);
    if (!filter.to) return error_reply(400, "bad_request", "to must be RFC 3339 or YYYY-MM-DD");
  }
  try {
    return json_reply(200, entries_json(services_.store.query_entries(filter)));
  } catch (const store::StoreError& e) {
    return error_reply(400, "invalid_range", e.what());
  }
}

HttpReply RestApi::create_asset(std::string_view body) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    return error_reply(400, "bad_request", "body must be JSON");
  }
  if (request.is_object() && !request.contains("created_at"))
    request["created_at"] = format_rfc3339_ms(services_.now());
  try {
    const auto asset = assets::asset_from_json(request);
    services_.registry.register_asset(asset);
    return json_reply(201, assets::to_json(asset));
  } catch (const std::invalid_argument& e) {
    return error_reply(400, "invalid_asset", e.what());
  } catch (const assets::RegistryError& e) {
    switch (e.code()) {
      case assets::RegistryErrc::DuplicateAsset: return error_reply(409, "duplicate_asset", e.what());
      case assets::RegistryErrc::InvalidAsset: return error_reply(400, "invalid_asset", e.what());
      default: return error_reply(500, "storage", e.what());
    }
  }
}

HttpReply RestApi::get_asset(const std::string& asset_id, const ParsedTarget& target) {
  const auto it = target.query.find("history");
  const bool with_history = it != target.query.end() && (it->second == "true" || it->second == "1");
  try {
    if (!with_history) {
      const auto asset = services_.registry.find(asset_id);
      if (!asset) return error_reply(404, "asset_not_found", asset_id);
      return json_reply(200, assets::to_json(*asset));
    }
    const auto view = assets::get_asset_with_history(services_.registry, services_.store, asset_id);
    return json_reply(200, json{{"asset", assets::to_json(view.asset)}, {"history", entries_json(view.history)}});
  } catch (const assets::RegistryError& e) {
    return error_reply(404, "asset_not_found", e.what());
  }
}

}  // namespace hfm::gateway

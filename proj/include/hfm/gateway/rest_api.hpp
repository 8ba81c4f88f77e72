#pragma once

#include <map>
#include <string>
#include <string_view>

#include "hfm/gateway/session_handler.hpp"

namespace hfm::gateway {

struct HttpReply {
  unsigned status = 200;
  std::string body;
};

/// Target split into a percent-decoded path and query parameters.
struct ParsedTarget {
  std::string path;
  std::map<std::string, std::string> query;
};

ParsedTarget parse_target(std::string_view target);

/// REST surface of the gateway, independent of the HTTP transport.
///
///   POST /api/v1/auth/token              {subject, passphrase} -> {token}
///   GET  /api/v1/sessions/{id}/entries   [?date=YYYY-MM-DD]    logs:read
///   GET  /api/v1/entries                 [?asset=&from=&to=]   logs:read
///   POST /api/v1/assets                  Asset JSON            assets:write
///   GET  /api/v1/assets/{id}             [?history=true]       assets:read
class RestApi {
 public:
  RestApi(Services& services, std::string dev_passphrase, int64_t token_ttl_seconds);

  HttpReply handle(std::string_view method, std::string_view target, std::string_view authorization,
                   std::string_view body);

 private:
  HttpReply issue_token(std::string_view body);
  HttpReply session_entries(const std::string& session_id, const ParsedTarget& target);
  HttpReply query_entries(const ParsedTarget& target);
  HttpReply create_asset(std::string_view body);
  HttpReply get_asset(const std::string& asset_id, const ParsedTarget& target);

  Services& services_;
  std::string dev_passphrase_;
  int64_t token_ttl_seconds_;
};

}  // namespace hfm::gateway

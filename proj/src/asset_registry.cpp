#include "hfm/asset_registry.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>

#include "hfm/command_grammar.hpp"
#include "hfm/timestamp.hpp"

namespace hfm::assets {

using nlohmann::json;

namespace {

bool looks_like_uri(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos || colon == 0) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  for (size_t i = 1; i < colon; ++i) {
    const char c = s[i];
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> asset_violations(const Asset& a) {
  std::vector<std::string> out;
  if (!grammar::is_asset_code(a.asset_id)) out.emplace_back("asset_id is not a normalized asset code");
  if (a.asset_type.empty()) out.emplace_back("asset_type is empty");
  for (const auto& ref : a.doc_refs)
    if (!looks_like_uri(ref)) out.push_back("doc_ref is not a URI: " + ref);
  if (!parse_rfc3339(a.created_at)) out.emplace_back("created_at is not RFC 3339");
  return out;
}

json to_json(const Asset& a) {
  return json{{"asset_id", a.asset_id},
              {"asset_type", a.asset_type},
              {"location", a.location},
              {"doc_refs", a.doc_refs},
              {"created_at", a.created_at}};
}

Asset asset_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("asset must be an object");
  auto str = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_string())
      throw std::invalid_argument(std::string("asset needs string ") + name);
    return j[name].get<std::string>();
  };
  Asset a;
  a.asset_id = str("asset_id");
  a.asset_type = str("asset_type");
  a.location = j.contains("location") ? str("location") : "";
  if (j.contains("doc_refs")) {
    if (!j["doc_refs"].is_array()) throw std::invalid_argument("doc_refs must be an array");
    for (const auto& r : j["doc_refs"]) {
      if (!r.is_string()) throw std::invalid_argument("doc_refs must hold strings");
      a.doc_refs.push_back(r.get<std::string>());
    }
  }
  a.created_at = str("created_at");
  return a;
}

AssetRegistry::AssetRegistry(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(file_);
  if (!in) return;
  std::string line;
  uintmax_t complete = 0;
  bool torn = false;
  while (std::getline(in, line)) {
    // A final line without newline is a torn append: dropped so the next
    // append starts on a fresh line.
    if (in.eof()) {
      torn = true;
      break;
    }
    complete += line.size() + 1;
    if (line.empty()) continue;
    try {
      Asset a = asset_from_json(json::parse(line));
      assets_.insert_or_assign(a.asset_id, std::move(a));
    } catch (const std::exception& e) {
      throw RegistryError(RegistryErrc::StorageFailure,
                          "corrupt registry line in " + file_.string() + ": " + e.what());
    }
  }
  in.close();
  if (torn) {
    std::error_code ec;
    std::filesystem::resize_file(file_, complete, ec);
    if (ec) throw RegistryError(RegistryErrc::StorageFailure, "cannot truncate " + file_.string() + ": " + ec.message());
  }
}

void AssetRegistry::register_asset(const Asset& asset) {
  if (auto v = asset_violations(asset); !v.empty())
    throw RegistryError(RegistryErrc::InvalidAsset, v.front());

  std::unique_lock lock(mutex_);
  if (assets_.contains(asset.asset_id))
    throw RegistryError(RegistryErrc::DuplicateAsset, "asset already registered: " + asset.asset_id);

  const std::string line = to_json(asset).dump() + "\n";
  const int fd = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw RegistryError(RegistryErrc::StorageFailure, "open " + file_.string() + ": " + std::strerror(errno));
  const ssize_t n = ::write(fd, line.data(), line.size());
  const bool ok = n == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw RegistryError(RegistryErrc::StorageFailure, "append to " + file_.string() + " failed");
  assets_.emplace(asset.asset_id, asset);
}

std::optional<Asset> AssetRegistry::find(const std::string& asset_id) const {
  std::shared_lock lock(mutex_);
  const auto it = assets_.find(asset_id);
  if (it == assets_.end()) return std::nullopt;
  return it->second;
}

bool AssetRegistry::contains(const std::string& asset_id) const {
  std::shared_lock lock(mutex_);
  return assets_.contains(asset_id);
}

std::vector<Asset> AssetRegistry::list() const {
  std::shared_lock lock(mutex_);
  std::vector<Asset> out;
  for (const auto& [_, a] : assets_) out.push_back(a);
  return out;
}

AssetHistory get_asset_with_history(const AssetRegistry& registry, const store::LogStore& store,
                                    const std::string& asset_id) {
  auto asset = registry.find(asset_id);
  if (!asset) throw RegistryError(RegistryErrc::AssetNotFound, "unknown asset " + asset_id);
  store::QueryFilter filter;
  filter.asset_id = asset_id;
  return {std::move(*asset), store.query_entries(filter)};
}

}  // namespace hfm::assets

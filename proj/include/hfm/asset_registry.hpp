#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfm/log_pipeline.hpp"
#include "hfm/log_store.hpp"
#include "json.hpp"

namespace hfm::assets {

struct Asset {
  std::string asset_id;
  std::string asset_type;
  std::string location;
  std::vector<std::string> doc_refs;
  std::string created_at;  // RFC 3339 UTC

  bool operator==(const Asset&) const = default;
};

std::vector<std::string> asset_violations(const Asset& asset);
nlohmann::json to_json(const Asset& asset);
/// Throws std::invalid_argument.
Asset asset_from_json(const nlohmann::json& j);

enum class RegistryErrc { InvalidAsset, DuplicateAsset, AssetNotFound, StorageFailure };

class RegistryError : public std::runtime_error {
 public:
  RegistryError(RegistryErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  RegistryErrc code() const noexcept { return code_; }

 private:
  RegistryErrc code_;
};

/// Assets persisted as one JSON object per line. Writes are serialized,
/// reads run concurrently.
class AssetRegistry {
 public:
  explicit AssetRegistry(std::filesystem::path file);

  void register_asset(const Asset& asset);
  std::optional<Asset> find(const std::string& asset_id) const;
  bool contains(const std::string& asset_id) const;
  std::vector<Asset> list() const;

 private:
  std::filesystem::path file_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Asset> assets_;
};

struct AssetHistory {
  Asset asset;
  std::vector<pipeline::LogEntry> history;  // by logged_at
};

/// Service history is a view over the log store. Throws RegistryError{AssetNotFound}.
AssetHistory get_asset_with_history(const AssetRegistry& registry, const store::LogStore& store,
                                    const std::string& asset_id);

}  // namespace hfm::assets

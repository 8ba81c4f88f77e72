#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfm/log_pipeline.hpp"
#include "hfm/timestamp.hpp"

namespace hfm::store {

enum class StoreErrc { InvalidEntry, DuplicateEntry, StorageFailure, InvalidRange };

class StoreError : public std::runtime_error {
 public:
  StoreError(StoreErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  StoreErrc code() const noexcept { return code_; }

 private:
  StoreErrc code_;
};

/// One line of a session's index.jsonl.
struct IndexLine {
  uint64_t entry_seq = 0;
  std::string entry_id;
  std::string relative_path;
  std::string logged_at;
  std::optional<std::string> asset_id;

  bool operator==(const IndexLine&) const = default;
};

std::string encode_index_line(const IndexLine& line);
/// Throws std::invalid_argument.
IndexLine decode_index_line(std::string_view text);

/// `logs/{YYYY-MM-DD}/{session_id}/{entry_seq:06}.json`, date taken from logged_at.
std::string relative_path_for(const pipeline::LogEntry& entry);

struct CorruptEntry {
  std::string path;  // relative to the store root
  std::string reason;
};

struct SessionEntries {
  std::vector<pipeline::LogEntry> entries;  // ordered by entry_seq
  std::vector<CorruptEntry> corrupt;
};

struct QueryFilter {
  std::optional<std::string> asset_id;
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // inclusive
};

struct RecoveryReport {
  size_t temp_files_removed = 0;
  size_t entries_reindexed = 0;
  size_t torn_index_lines_dropped = 0;
};

struct FsckReport {
  size_t entries = 0;
  std::vector<std::string> problems;
  bool clean() const { return problems.empty(); }
};

/// Append-only blob-style store rooted at a directory. Entry files are
/// published by atomic rename; the session index is appended afterwards.
class LogStore {
 public:
  struct Options {
    bool fsync = true;
  };

  explicit LogStore(std::filesystem::path root);
  LogStore(std::filesystem::path root, Options options);

  const std::filesystem::path& root() const { return root_; }

  /// Brings the store back to a consistent state after a crash: removes
  /// unpublished temp files, drops a torn trailing index line and indexes
  /// published entries the index is missing.
  RecoveryReport recover();

  /// Returns the committed relative path. Throws StoreError.
  std::string append_entry(const pipeline::LogEntry& entry);

  /// Entries of one session filed under `date` or an adjacent date (a session
  /// may straddle midnight). Unknown sessions yield an empty result.
  SessionEntries read_session_entries(const std::string& session_id, Date date) const;
  /// Entries of one session across every date.
  SessionEntries read_session_entries(const std::string& session_id) const;

  /// Ordered by (logged_at, session_id, entry_seq). Throws StoreError{InvalidRange}.
  std::vector<pipeline::LogEntry> query_entries(const QueryFilter& filter) const;

  /// Index/filesystem agreement check.
  FsckReport fsck() const;

 private:
  std::filesystem::path logs_dir() const { return root_ / "logs"; }
  void read_session_dir(const std::filesystem::path& dir, SessionEntries& out) const;

  std::filesystem::path root_;
  Options options_;
};

}  // namespace hfm::store

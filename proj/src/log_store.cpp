#include "hfm/log_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "hfm/crash_points.hpp"

namespace hfm::store {

namespace fs = std::filesystem;
using nlohmann::json;
using pipeline::LogEntry;

namespace {

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }

 private:
  int fd_;
};

[[noreturn]] void storage_failure(const std::string& what) {
  throw StoreError(StoreErrc::StorageFailure, what + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const std::string& what) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_failure(what);
    }
    data.remove_prefix(static_cast<size_t>(n));
  }
}

void fsync_dir(const fs::path& dir) {
  Fd fd(::open(dir.c_str(), O_RDONLY | O_DIRECTORY));
  if (fd) ::fsync(fd.get());
}

bool read_file(const fs::path& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

/// `NNNNNN.json` -> NNNNNN (at least six digits)
std::optional<uint64_t> entry_file_seq(const fs::path& path) {
  const std::string name = path.filename().string();
  if (name.size() < 11 || name.size() > 25 || !name.ends_with(".json")) return std::nullopt;
  uint64_t seq = 0;
  for (size_t i = 0; i + 5 < name.size(); ++i) {
    if (name[i] < '0' || name[i] > '9') return std::nullopt;
    seq = seq * 10 + static_cast<uint64_t>(name[i] - '0');
  }
  return seq;
}

bool is_temp_file(const fs::path& path) {
  const std::string name = path.filename().string();
  return name.size() > 4 && name.front() == '.' && name.ends_with(".tmp");
}

std::string seq6(uint64_t seq) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(seq));
  return buf;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Loads an entry file and checks it belongs where it is filed.
std::optional<LogEntry> load_entry(const fs::path& file, const std::string& relative,
                                   std::string& reason) {
  std::string text;
  if (!read_file(file, text)) {
    reason = "unreadable";
    return std::nullopt;
  }
  try {
    LogEntry entry = pipeline::decode_entry(text);
    if (relative_path_for(entry) != relative) {
      reason = "entry contents do not match its path";
      return std::nullopt;
    }
    return entry;
  } catch (const std::exception& e) {
    reason = e.what();
    return std::nullopt;
  }
}

struct IndexFile {
  std::vector<IndexLine> lines;
  bool torn_tail = false;
  size_t good_bytes = 0;
  std::vector<std::string> bad_lines;
};

IndexFile read_index(const fs::path& path) {
  IndexFile out;
  std::string text;
  if (!read_file(path, text)) return out;
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      out.torn_tail = true;
      break;
    }
    const std::string_view line(text.data() + pos, nl - pos);
    try {
      out.lines.push_back(decode_index_line(line));
      out.good_bytes = nl + 1;
    } catch (const std::exception& e) {
      // A bad line that is the last complete one is treated as torn.
      if (nl + 1 == text.size()) {
        out.torn_tail = true;
        break;
      }
      out.bad_lines.push_back(std::string(line));
      out.good_bytes = nl + 1;
    }
    pos = nl + 1;
  }
  return out;
}

}  // namespace

std::string encode_index_line(const IndexLine& line) {
  return json{{"entry_seq", line.entry_seq},
              {"entry_id", line.entry_id},
              {"relative_path", line.relative_path},
              {"logged_at", line.logged_at},
              {"asset_id", line.asset_id ? json(*line.asset_id) : json(nullptr)}}
      .dump();
}

IndexLine decode_index_line(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(e.what());
  }
  if (!j.is_object() || !j.contains("entry_seq") || !j["entry_seq"].is_number_unsigned() ||
      !j.contains("entry_id") || !j["entry_id"].is_string() || !j.contains("relative_path") ||
      !j["relative_path"].is_string() || !j.contains("logged_at") || !j["logged_at"].is_string() ||
      !j.contains("asset_id") || !(j["asset_id"].is_string() || j["asset_id"].is_null()))
    throw std::invalid_argument("malformed index line");
  IndexLine line;
  line.entry_seq = j["entry_seq"].get<uint64_t>();
  line.entry_id = j["entry_id"].get<std::string>();
  line.relative_path = j["relative_path"].get<std::string>();
  line.logged_at = j["logged_at"].get<std::string>();
  if (j["asset_id"].is_string()) line.asset_id = j["asset_id"].get<std::string>();
  return line;
}

std::string relative_path_for(const LogEntry& entry) {
  const auto t = parse_rfc3339(entry.logged_at);
  if (!t) throw StoreError(StoreErrc::InvalidEntry, "logged_at is not a timestamp");
  return "logs/" + date_of(*t) + "/" + entry.session_id + "/" + seq6(entry.entry_seq) + ".json";
}

LogStore::LogStore(fs::path root) : LogStore(std::move(root), Options{}) {}

LogStore::LogStore(fs::path root, Options options) : root_(std::move(root)), options_(options) {
  std::error_code ec;
  fs::create_directories(logs_dir(), ec);
  if (ec) throw StoreError(StoreErrc::StorageFailure, "cannot create " + logs_dir().string() + ": " + ec.message());
}

std::string LogStore::append_entry(const LogEntry& entry) {
  if (auto v = pipeline::validate_entry(entry); !v.empty())
    throw StoreError(StoreErrc::InvalidEntry, "entry fails validation: " + v.front());

  const std::string relative = relative_path_for(entry);
  const fs::path final_path = root_ / relative;
  const fs::path dir = final_path.parent_path();
  const fs::path temp_path = dir / ("." + final_path.filename().string() + ".tmp");

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StoreError(StoreErrc::StorageFailure, "cannot create " + dir.string() + ": " + ec.message());
  if (fs::exists(final_path))
    throw StoreError(StoreErrc::DuplicateEntry, "entry already stored: " + entry.entry_id);

  const std::string bytes = pipeline::encode_entry(entry);

  crash::reach(crash::CrashPoint::PreTempWrite);
  {
    Fd fd(::open(temp_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
    if (!fd) storage_failure("open " + temp_path.string());
    write_all(fd.get(), bytes, "write " + temp_path.string());
    if (options_.fsync && ::fsync(fd.get()) != 0) storage_failure("fsync " + temp_path.string());
  }

  crash::reach(crash::CrashPoint::PreRename);
  int renamed = ::renameat2(AT_FDCWD, temp_path.c_str(), AT_FDCWD, final_path.c_str(), RENAME_NOREPLACE);
  if (renamed != 0 && errno == EINVAL) {
    // Filesystem without RENAME_NOREPLACE; the single-writer-per-session rule
    // makes the earlier existence check sufficient.
    renamed = ::rename(temp_path.c_str(), final_path.c_str());
  }
  if (renamed != 0) {
    const int err = errno;
    ::unlink(temp_path.c_str());
    errno = err;
    if (err == EEXIST) throw StoreError(StoreErrc::DuplicateEntry, "entry already stored: " + entry.entry_id);
    storage_failure("rename into " + final_path.string());
  }
  if (options_.fsync) fsync_dir(dir);

  crash::reach(crash::CrashPoint::PreIndex);
  const IndexLine line{entry.entry_seq, entry.entry_id, relative, entry.logged_at, entry.asset_id};
  {
    const fs::path index_path = dir / "index.jsonl";
    Fd fd(::open(index_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
    if (!fd) storage_failure("open " + index_path.string());
    write_all(fd.get(), encode_index_line(line) + "\n", "append " + index_path.string());
    if (options_.fsync && ::fsync(fd.get()) != 0) storage_failure("fsync " + index_path.string());
  }
  return relative;
}

void LogStore::read_session_dir(const fs::path& dir, SessionEntries& out) const {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && entry_file_seq(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string relative = fs::relative(file, root_).generic_string();
    std::string reason;
    if (auto entry = load_entry(file, relative, reason)) {
      out.entries.push_back(std::move(*entry));
    } else {
      out.corrupt.push_back({relative, reason});
    }
  }
}

SessionEntries LogStore::read_session_entries(const std::string& session_id, Date date) const {
  SessionEntries out;
  if (!pipeline::is_valid_session_id(session_id)) return out;
  for (const Date d : {date - std::chrono::days{1}, date, date + std::chrono::days{1}})
    read_session_dir(logs_dir() / format_date(d) / session_id, out);
  std::sort(out.entries.begin(), out.entries.end(),
            [](const LogEntry& a, const LogEntry& b) { return a.entry_seq < b.entry_seq; });
  return out;
}

SessionEntries LogStore::read_session_entries(const std::string& session_id) const {
  SessionEntries out;
  if (!pipeline::is_valid_session_id(session_id)) return out;
  for (const auto& date_dir : sorted_subdirs(logs_dir())) read_session_dir(date_dir / session_id, out);
  std::sort(out.entries.begin(), out.entries.end(),
            [](const LogEntry& a, const LogEntry& b) { return a.entry_seq < b.entry_seq; });
  return out;
}

std::vector<LogEntry> LogStore::query_entries(const QueryFilter& filter) const {
  if (filter.from && filter.to && *filter.from > *filter.to)
    throw StoreError(StoreErrc::InvalidRange, "from is after to");

  std::vector<std::pair<Timestamp, LogEntry>> hits;
  for (const auto& date_dir : sorted_subdirs(logs_dir())) {
    const auto date = parse_date(date_dir.filename().string());
    if (!date) continue;
    // Entries are filed under their own logged_at date.
    if (filter.from && *date < std::chrono::floor<std::chrono::days>(*filter.from)) continue;
    if (filter.to && *date > std::chrono::floor<std::chrono::days>(*filter.to)) continue;

    for (const auto& session_dir : sorted_subdirs(date_dir)) {
      for (const auto& line : read_index(session_dir / "index.jsonl").lines) {
        if (filter.asset_id && line.asset_id != filter.asset_id) continue;
        const auto at = parse_rfc3339(line.logged_at);
        if (!at) continue;
        if (filter.from && *at < *filter.from) continue;
        if (filter.to && *at > *filter.to) continue;
        std::string reason;
        if (auto entry = load_entry(root_ / line.relative_path, line.relative_path, reason))
          hits.emplace_back(*at, std::move(*entry));
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first, a.second.session_id, a.second.entry_seq) <
           std::tie(b.first, b.second.session_id, b.second.entry_seq);
  });
  std::vector<LogEntry> out;
  out.reserve(hits.size());
  for (auto& [_, entry] : hits) out.push_back(std::move(entry));
  return out;
}

RecoveryReport LogStore::recover() {
  RecoveryReport report;
  for (const auto& date_dir : sorted_subdirs(logs_dir())) {
    for (const auto& session_dir : sorted_subdirs(date_dir)) {
      std::error_code ec;
      std::map<uint64_t, fs::path> files;
      for (const auto& e : fs::directory_iterator(session_dir, ec)) {
        if (is_temp_file(e.path())) {
          fs::remove(e.path(), ec);
          ++report.temp_files_removed;
        } else if (auto seq = entry_file_seq(e.path())) {
          files.emplace(*seq, e.path());
        }
      }

      const fs::path index_path = session_dir / "index.jsonl";
      IndexFile index = read_index(index_path);
      if (index.torn_tail) {
        fs::resize_file(index_path, index.good_bytes, ec);
        ++report.torn_index_lines_dropped;
      }

      std::set<uint64_t> indexed;
      for (const auto& line : index.lines) indexed.insert(line.entry_seq);
      std::vector<IndexLine> missing;
      for (const auto& [seq, file] : files) {
        if (indexed.contains(seq)) continue;
        const std::string relative = fs::relative(file, root_).generic_string();
        std::string reason;
        if (auto entry = load_entry(file, relative, reason))
          missing.push_back({entry->entry_seq, entry->entry_id, relative, entry->logged_at, entry->asset_id});
      }
      if (missing.empty()) continue;

      std::vector<IndexLine> all = index.lines;
      all.insert(all.end(), missing.begin(), missing.end());
      std::sort(all.begin(), all.end(),
                [](const IndexLine& a, const IndexLine& b) { return a.entry_seq < b.entry_seq; });
      // Rewrite the index through a temp file so it is never observed half-done.
      const fs::path temp = session_dir / ".index.jsonl.tmp";
      {
        Fd fd(::open(temp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
        if (!fd) storage_failure("open " + temp.string());
        std::string text;
        for (const auto& line : all) text += encode_index_line(line) + "\n";
        write_all(fd.get(), text, "write " + temp.string());
        if (options_.fsync) ::fsync(fd.get());
      }
      if (::rename(temp.c_str(), index_path.c_str()) != 0) storage_failure("rename " + index_path.string());
      if (options_.fsync) fsync_dir(session_dir);
      report.entries_reindexed += missing.size();
    }
  }
  return report;
}

FsckReport LogStore::fsck() const {
  FsckReport report;
  for (const auto& date_dir : sorted_subdirs(logs_dir())) {
    for (const auto& session_dir : sorted_subdirs(date_dir)) {
      const std::string where = fs::relative(session_dir, root_).generic_string();
      std::error_code ec;
      std::map<uint64_t, fs::path> files;
      for (const auto& e : fs::directory_iterator(session_dir, ec)) {
        if (is_temp_file(e.path())) {
          report.problems.push_back(where + ": leftover temp file " + e.path().filename().string());
        } else if (auto seq = entry_file_seq(e.path())) {
          files.emplace(*seq, e.path());
        } else if (e.path().filename() != "index.jsonl") {
          report.problems.push_back(where + ": unexpected file " + e.path().filename().string());
        }
      }

      const IndexFile index = read_index(session_dir / "index.jsonl");
      if (index.torn_tail) report.problems.push_back(where + ": torn index tail");
      for (const auto& bad : index.bad_lines) report.problems.push_back(where + ": unparsable index line " + bad);

      std::set<uint64_t> indexed;
      uint64_t prev = 0;
      for (const auto& line : index.lines) {
        if (line.entry_seq <= prev) report.problems.push_back(where + ": index out of order at seq " + std::to_string(line.entry_seq));
        prev = line.entry_seq;
        if (!indexed.insert(line.entry_seq).second)
          report.problems.push_back(where + ": duplicate index line for seq " + std::to_string(line.entry_seq));
        const auto file = files.find(line.entry_seq);
        if (file == files.end()) {
          report.problems.push_back(where + ": index names missing entry " + line.entry_id);
          continue;
        }
        const std::string relative = fs::relative(file->second, root_).generic_string();
        if (line.relative_path != relative)
          report.problems.push_back(where + ": index path mismatch for " + line.entry_id);
        std::string reason;
        const auto entry = load_entry(file->second, relative, reason);
        if (!entry) {
          report.problems.push_back(relative + ": " + reason);
          continue;
        }
        if (entry->entry_id != line.entry_id || entry->logged_at != line.logged_at ||
            entry->asset_id != line.asset_id)
          report.problems.push_back(relative + ": index line disagrees with entry");
        if (auto v = pipeline::validate_entry(*entry); !v.empty())
          report.problems.push_back(relative + ": " + v.front());
      }
      for (const auto& [seq, file] : files) {
        ++report.entries;
        if (!indexed.contains(seq))
          report.problems.push_back(fs::relative(file, root_).generic_string() + ": not indexed");
      }
    }
  }
  return report;
}

}  // namespace hfm::store

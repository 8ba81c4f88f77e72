#pragma once

#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace hfm {

/// Wall-clock instant at millisecond resolution, UTC.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Date = std::chrono::sys_days;

/// Injected clock. Components never read the system clock directly.
using Clock = std::function<Timestamp()>;

Clock system_clock();

/// Wraps a clock so readings never go backwards.
class MonotoneClock {
 public:
  explicit MonotoneClock(Clock source) : source_(std::move(source)) {}

  Timestamp now();

 private:
  Clock source_;
  std::mutex mutex_;
  std::optional<Timestamp> last_;
};

/// "2025-03-14T10:22:05.120Z"
std::string format_rfc3339_ms(Timestamp t);

/// Accepts any RFC 3339 date-time (fractional seconds and numeric offsets
/// allowed). Fractions beyond milliseconds are truncated.
std::optional<Timestamp> parse_rfc3339(std::string_view text);

/// Strict log-entry form: exactly "YYYY-MM-DDTHH:MM:SS.mmmZ" and a real
/// calendar date.
bool is_rfc3339_utc_ms(std::string_view text);

std::string format_date(Date d);
std::string date_of(Timestamp t);
std::optional<Date> parse_date(std::string_view text);

int64_t unix_seconds(Timestamp t);
Timestamp from_unix_seconds(int64_t s);

}  // namespace hfm

#include "hfm/crash_points.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace hfm::crash {

namespace {

std::atomic<int> armed_point{-1};
std::atomic<uint64_t> armed_hit{0};
std::atomic<uint64_t> hits{0};

}  // namespace

std::string_view to_string(CrashPoint point) {
  switch (point) {
    case CrashPoint::PreTempWrite: return "pre-temp-write";
    case CrashPoint::PreRename: return "pre-rename";
    case CrashPoint::PreIndex: return "pre-index";
    case CrashPoint::PreAck: return "pre-ack";
  }
  return "?";
}

std::optional<CrashPoint> crash_point_from_string(std::string_view name) {
  for (auto p : {CrashPoint::PreTempWrite, CrashPoint::PreRename, CrashPoint::PreIndex, CrashPoint::PreAck})
    if (to_string(p) == name) return p;
  return std::nullopt;
}

void arm(CrashPoint point, uint64_t hit) {
  hits = 0;
  armed_hit = hit;
  armed_point = static_cast<int>(point);
}

void disarm() { armed_point = -1; }

void arm_from_environment() {
  const char* at = std::getenv("HFM_CRASH_AT");
  if (!at || !*at) return;
  const auto point = crash_point_from_string(at);
  if (!point) return;
  uint64_t hit = 1;
  if (const char* n = std::getenv("HFM_CRASH_HIT"); n && *n) hit = std::stoull(n);
  arm(*point, hit);
}

void reach(CrashPoint point) {
  if (armed_point.load() != static_cast<int>(point)) return;
  if (++hits == armed_hit.load()) std::_Exit(kCrashExitCode);
}

}  // namespace hfm::crash

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

// Fault injection for crash-safety testing. When a point is armed the process
// terminates immediately (no unwinding, no flushing) the n-th time execution
// reaches it, which is indistinguishable from a kill at that instant.
namespace hfm::crash {

enum class CrashPoint { PreTempWrite, PreRename, PreIndex, PreAck };

inline constexpr int kCrashExitCode = 86;

std::string_view to_string(CrashPoint point);
std::optional<CrashPoint> crash_point_from_string(std::string_view name);

void arm(CrashPoint point, uint64_t hit = 1);
void disarm();

/// Reads HFM_CRASH_AT (e.g. "pre-rename") and HFM_CRASH_HIT (default 1).
void arm_from_environment();

void reach(CrashPoint point);

}  // namespace hfm::crash

#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

namespace voice_ehr {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// RFC 3339 UTC with millisecond precision, e.g. 2024-03-01T09:30:00.000Z.
std::string format_rfc3339(Timestamp t);

/// Accepts "Z" or numeric offsets and optional fractional seconds.
Timestamp parse_rfc3339(std::string_view text);

Timestamp now_utc();

/// Injectable time source; the engine and ingest never read the wall clock directly.
using Clock = std::function<Timestamp()>;

Clock system_clock();

}  // namespace voice_ehr

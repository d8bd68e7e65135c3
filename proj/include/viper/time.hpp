#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace viper {

// All timestamps are UTC with millisecond resolution.
using Duration = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Duration>;

inline std::int64_t to_millis(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_millis(std::int64_t ms) { return Timestamp{Duration{ms}}; }

inline Timestamp wall_clock_now()
{
    return std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now());
}

// "2019-04-13T14:02:05.250Z"
std::string format_iso8601(Timestamp t);

// Accepts "YYYY-MM-DDTHH:MM:SS[.fff]Z". Throws ParseError.
Timestamp parse_iso8601(const std::string& text);

} // namespace viper

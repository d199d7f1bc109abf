#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace mkprice {

/// Hour-resolution UTC timestamp.
using Timestamp = std::chrono::sys_time<std::chrono::hours>;

/// Parses `YYYY-MM-DDTHH[:MM[:SS]][Z]`. Minutes and seconds, when present,
/// must be zero. Throws InputError otherwise.
Timestamp parse_timestamp(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:00:00Z`.
std::string format_timestamp(Timestamp t);

/// Formats the calendar date part only (`YYYY-MM-DD`).
std::string format_date(Timestamp t);

/// Position of `t` inside a cycle of `period` hours, counted from the epoch.
/// With period 24 this is the UTC hour of day.
int cycle_slot(Timestamp t, int period);

}  // namespace mkprice

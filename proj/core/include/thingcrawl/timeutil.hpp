#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace thingcrawl {

// UTC timestamps, second resolution (unix seconds).
using Timestamp = std::int64_t;

// Formats as ISO-8601 UTC, e.g. "2015-01-27T09:33:06Z".
std::string format_iso8601(Timestamp t);

// Compact form usable as a path component: "20150127T093306Z".
std::string format_compact(Timestamp t);

// Accepts "YYYY-MM-DDTHH:MM:SS" with optional fractional seconds (truncated)
// and either "Z", "+HH:MM"/"-HH:MM" offset, or no suffix (treated as UTC).
// Also accepts the compact form.
std::optional<Timestamp> parse_iso8601(const std::string& s);

// UTC calendar date "YYYY-MM-DD" of a timestamp.
std::string utc_date(Timestamp t);

}  // namespace thingcrawl

#include "thingcrawl/timeutil.hpp"

#include <cstdio>
#include <ctime>

namespace thingcrawl {

namespace {

std::tm to_utc_tm(Timestamp t) {
  std::time_t tt = static_cast<std::time_t>(t);
  std::tm out{};
  gmtime_r(&tt, &out);
  return out;
}

}  // namespace

std::string format_iso8601(Timestamp t) {
  std::tm tm = to_utc_tm(t);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::string format_compact(Timestamp t) {
  std::tm tm = to_utc_tm(t);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::string utc_date(Timestamp t) {
  std::tm tm = to_utc_tm(t);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday);
  return buf;
}

std::optional<Timestamp> parse_iso8601(const std::string& s) {
  int y, mo, d, h, mi, se;
  int n = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n",
                  &y, &mo, &d, &h, &mi, &se, &n) == 6 && n > 0) {
    // fall through to offset handling below
  } else if (std::sscanf(s.c_str(), "%4d%2d%2dT%2d%2d%2d%n",
                         &y, &mo, &d, &h, &mi, &se, &n) == 6 && n > 0) {
    // compact form
  } else {
    return std::nullopt;
  }
  std::size_t pos = static_cast<std::size_t>(n);
  // skip fractional seconds
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  long offset = 0;
  if (pos < s.size()) {
    char c = s[pos];
    if (c == 'Z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      int oh = 0, om = 0, k = 0;
      if (std::sscanf(s.c_str() + pos, "%*c%2d:%2d%n", &oh, &om, &k) != 2 ||
          k == 0) {
        if (std::sscanf(s.c_str() + pos, "%*c%2d%2d%n", &oh, &om, &k) < 1 ||
            k == 0)
          return std::nullopt;
      }
      offset = (oh * 3600L + om * 60L) * (c == '+' ? 1 : -1);
      pos += static_cast<std::size_t>(k);
    }
  }
  if (pos != s.size()) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60)
    return std::nullopt;

  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = se;
  std::time_t t = timegm(&tm);
  return static_cast<Timestamp>(t) - offset;
}

}  // namespace thingcrawl

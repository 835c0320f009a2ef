#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "netmo/common.hpp"

namespace netmo {

// Civil-date conversions (proleptic Gregorian), Howard Hinnant's algorithms.
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

/// Parses `YYYY-MM-DDTHH:MM:SS[.mmm]Z` (UTC, millisecond precision).
inline std::optional<TimestampMs> try_parse_iso8601(std::string_view s) {
  auto digits = [&](std::size_t pos, std::size_t n, long& out) {
    if (pos + n > s.size()) return false;
    long v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const char c = s[pos + i];
      if (c < '0' || c > '9') return false;
      v = v * 10 + (c - '0');
    }
    out = v;
    return true;
  };
  long y, mo, d, h, mi, sec, ms = 0;
  if (!digits(0, 4, y) || s.size() < 20 || s[4] != '-' || !digits(5, 2, mo) ||
      s[7] != '-' || !digits(8, 2, d) || s[10] != 'T' || !digits(11, 2, h) ||
      s[13] != ':' || !digits(14, 2, mi) || s[16] != ':' || !digits(17, 2, sec)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    if (!digits(pos + 1, 3, ms)) return std::nullopt;
    pos += 4;
  }
  if (pos + 1 != s.size() || s[pos] != 'Z') return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 59) {
    return std::nullopt;
  }
  const std::int64_t days = days_from_civil(static_cast<int>(y),
                                            static_cast<unsigned>(mo),
                                            static_cast<unsigned>(d));
  return ((days * 24 + h) * 60 + mi) * 60000 + sec * 1000 + ms;
}

inline TimestampMs parse_iso8601(std::string_view s) {
  if (auto t = try_parse_iso8601(s)) return *t;
  fail(Err::kMalformedRow, "bad ISO-8601 timestamp '" + std::string(s) + "'");
}

/// Formats a timestamp as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
inline std::string format_iso8601(TimestampMs t) {
  std::int64_t days = t / 86400000;
  std::int64_t rem = t % 86400000;
  if (rem < 0) {
    rem += 86400000;
    days -= 1;
  }
  int y;
  unsigned mo, d;
  civil_from_days(days, y, mo, d);
  const int ms = static_cast<int>(rem % 1000);
  const int sec = static_cast<int>(rem / 1000 % 60);
  const int mi = static_cast<int>(rem / 60000 % 60);
  const int h = static_cast<int>(rem / 3600000);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", y, mo, d, h, mi, sec, ms);
  return buf;
}

}  // namespace netmo

#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "netmo/csv.hpp"
#include "netmo/geometry.hpp"

namespace netmo {

// Minimal OGC Well-Known Text support: 2-D POINT and LINESTRING only.

namespace wkt_detail {

inline void skip_ws(std::string_view s, std::size_t& i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

inline bool match_tag(std::string_view s, std::size_t& i, std::string_view tag) {
  skip_ws(s, i);
  if (s.size() - i < tag.size()) return false;
  for (std::size_t k = 0; k < tag.size(); ++k) {
    if (std::toupper(static_cast<unsigned char>(s[i + k])) != tag[k]) return false;
  }
  i += tag.size();
  return true;
}

inline double parse_number(std::string_view s, std::size_t& i) {
  skip_ws(s, i);
  std::size_t j = i;
  while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '-' ||
                          s[j] == '+' || s[j] == '.' || s[j] == 'e' || s[j] == 'E')) {
    ++j;
  }
  if (j == i) fail(Err::kMalformedRow, "expected number in WKT");
  const double v = parse_double(s.substr(i, j - i));
  i = j;
  return v;
}

}  // namespace wkt_detail

inline PlanarPoint parse_wkt_point(std::string_view s) {
  std::size_t i = 0;
  if (!wkt_detail::match_tag(s, i, "POINT")) fail(Err::kMalformedRow, "expected POINT");
  wkt_detail::skip_ws(s, i);
  if (i >= s.size() || s[i] != '(') fail(Err::kMalformedRow, "expected ( in WKT point");
  ++i;
  PlanarPoint p;
  p.x = wkt_detail::parse_number(s, i);
  p.y = wkt_detail::parse_number(s, i);
  wkt_detail::skip_ws(s, i);
  if (i >= s.size() || s[i] != ')') fail(Err::kMalformedRow, "expected ) in WKT point");
  return p;
}

inline std::vector<PlanarPoint> parse_wkt_linestring(std::string_view s) {
  std::size_t i = 0;
  if (!wkt_detail::match_tag(s, i, "LINESTRING")) fail(Err::kMalformedRow, "expected LINESTRING");
  wkt_detail::skip_ws(s, i);
  if (i >= s.size() || s[i] != '(') fail(Err::kMalformedRow, "expected ( in WKT linestring");
  ++i;
  std::vector<PlanarPoint> pts;
  while (true) {
    PlanarPoint p;
    p.x = wkt_detail::parse_number(s, i);
    p.y = wkt_detail::parse_number(s, i);
    pts.push_back(p);
    wkt_detail::skip_ws(s, i);
    if (i < s.size() && s[i] == ',') {
      ++i;
      continue;
    }
    break;
  }
  wkt_detail::skip_ws(s, i);
  if (i >= s.size() || s[i] != ')') fail(Err::kMalformedRow, "expected ) in WKT linestring");
  if (pts.size() < 2) fail(Err::kMalformedRow, "LINESTRING needs at least two points");
  return pts;
}

inline std::string format_wkt_point(PlanarPoint p) {
  return "POINT(" + fmt_double(p.x) + " " + fmt_double(p.y) + ")";
}

inline std::string format_wkt_linestring(std::span<const PlanarPoint> pts) {
  std::string out = "LINESTRING(";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ", ";
    out += fmt_double(pts[i].x) + " " + fmt_double(pts[i].y);
  }
  out += ')';
  return out;
}

}  // namespace netmo

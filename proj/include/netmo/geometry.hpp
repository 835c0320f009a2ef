#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "netmo/common.hpp"

namespace netmo {

struct PlanarPoint {
  double x = 0.0;  ///< planar easting, meters
  double y = 0.0;  ///< planar northing, meters

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

inline double distance(PlanarPoint a, PlanarPoint b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

/// A 2-D polyline with a cumulative arc-length measure per vertex.
/// measure(0) == 0, measures strictly increase, and the last measure equals
/// the total length. Positions along the curve are addressed by measure.
class MeasuredPolyline {
 public:
  MeasuredPolyline() = default;

  /// Builds a polyline from raw vertices. Exactly-coincident consecutive
  /// vertices are dropped; fewer than two distinct vertices is an error.
  static MeasuredPolyline from_points(std::vector<PlanarPoint> pts) {
    std::vector<PlanarPoint> clean;
    clean.reserve(pts.size());
    for (const auto& p : pts) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        fail(Err::kDegenerateEdge, "non-finite vertex coordinate");
      }
      if (clean.empty() || !(clean.back() == p)) clean.push_back(p);
    }
    if (clean.size() < 2) {
      fail(Err::kDegenerateEdge, "polyline needs at least two distinct vertices");
    }
    MeasuredPolyline out;
    out.pts_ = std::move(clean);
    out.cum_.resize(out.pts_.size());
    out.cum_[0] = 0.0;
    for (std::size_t i = 1; i < out.pts_.size(); ++i) {
      out.cum_[i] = out.cum_[i - 1] + distance(out.pts_[i - 1], out.pts_[i]);
    }
    if (!(out.cum_.back() > 0.0)) {
      fail(Err::kDegenerateEdge, "zero-length polyline");
    }
    return out;
  }

  std::span<const PlanarPoint> points() const { return pts_; }
  std::span<const double> measures() const { return cum_; }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  const PlanarPoint& front() const { return pts_.front(); }
  const PlanarPoint& back() const { return pts_.back(); }

  /// Point at the given measure (linear interpolation inside the containing
  /// segment). Measures within eps outside [0, length] clamp; beyond that is
  /// an error.
  PlanarPoint locate(double m, double eps = 1e-9) const {
    if (m < -eps || m > length() + eps) {
      fail(Err::kMeasureOutOfRange,
           "measure " + std::to_string(m) + " outside [0, " + std::to_string(length()) + "]");
    }
    if (m <= 0.0) return pts_.front();
    if (m >= length()) return pts_.back();
    const std::size_t seg = segment_of(m);
    const double t = (m - cum_[seg]) / (cum_[seg + 1] - cum_[seg]);
    const PlanarPoint& a = pts_[seg];
    const PlanarPoint& b = pts_[seg + 1];
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
  }

  struct Projection {
    double measure = 0.0;   ///< measure of the nearest point on the polyline
    double distance = 0.0;  ///< planar distance from the query to that point
    int side = 0;           ///< +1 right of increasing-measure direction, -1 left, 0 on line
  };

  /// Nearest-point projection of q onto the polyline. Ties between segments
  /// resolve to the smaller measure.
  Projection project(PlanarPoint q, double eps_side = 1e-9) const {
    Projection best;
    double best_d2 = std::numeric_limits<double>::infinity();
    std::size_t best_seg = 0;
    double best_t = 0.0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      const PlanarPoint& a = pts_[i];
      const PlanarPoint& b = pts_[i + 1];
      const double dx = b.x - a.x, dy = b.y - a.y;
      const double len2 = dx * dx + dy * dy;
      double t = ((q.x - a.x) * dx + (q.y - a.y) * dy) / len2;
      t = std::clamp(t, 0.0, 1.0);
      const double fx = a.x + t * dx, fy = a.y + t * dy;
      const double d2 = (q.x - fx) * (q.x - fx) + (q.y - fy) * (q.y - fy);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_seg = i;
        best_t = t;
      }
    }
    const PlanarPoint& a = pts_[best_seg];
    const PlanarPoint& b = pts_[best_seg + 1];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double fx = a.x + best_t * dx, fy = a.y + best_t * dy;
    const double seg_len = cum_[best_seg + 1] - cum_[best_seg];
    best.measure = cum_[best_seg] + best_t * seg_len;
    best.distance = std::sqrt(best_d2);
    // Signed perpendicular offset: positive cross product means q is left of
    // the direction of increasing measure.
    const double cross = dx * (q.y - fy) - dy * (q.x - fx);
    const double offset = cross / seg_len;
    if (std::abs(offset) < eps_side) {
      best.side = 0;
    } else {
      best.side = offset > 0.0 ? -1 : 1;
    }
    return best;
  }

  /// Sub-curve between two measures, vertices ordered in the m1 -> m2
  /// direction. A degenerate interval (|m1 - m2| <= eps) is an error.
  MeasuredPolyline slice(double m1, double m2, double eps = 1e-9) const {
    if (std::abs(m1 - m2) <= eps) {
      fail(Err::kEmptyInterval, "sub-polyline over an empty measure interval");
    }
    const double lo = std::min(m1, m2), hi = std::max(m1, m2);
    if (lo < -eps || hi > length() + eps) {
      fail(Err::kMeasureOutOfRange, "sub-polyline measures outside the curve");
    }
    std::vector<PlanarPoint> out;
    out.push_back(locate(lo, eps));
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      if (cum_[i] > lo + eps && cum_[i] < hi - eps) out.push_back(pts_[i]);
    }
    out.push_back(locate(hi, eps));
    if (m1 > m2) std::reverse(out.begin(), out.end());
    return from_points(std::move(out));
  }

  MeasuredPolyline reversed() const {
    std::vector<PlanarPoint> rev(pts_.rbegin(), pts_.rend());
    return from_points(std::move(rev));
  }

  /// Appends another polyline whose first vertex coincides with our last.
  void append(const MeasuredPolyline& tail) {
    for (std::size_t i = 0; i < tail.pts_.size(); ++i) {
      if (tail.pts_[i] == pts_.back()) continue;
      pts_.push_back(tail.pts_[i]);
      cum_.push_back(cum_.back() + distance(pts_[pts_.size() - 2], pts_.back()));
    }
  }

  friend bool operator==(const MeasuredPolyline& a, const MeasuredPolyline& b) {
    return a.pts_ == b.pts_;
  }

 private:
  // Index of the segment [cum_[i], cum_[i+1]) containing m, for m in (0, length).
  std::size_t segment_of(double m) const {
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), m);
    std::size_t i = static_cast<std::size_t>(it - cum_.begin());
    if (i == 0) return 0;
    if (i >= cum_.size()) return cum_.size() - 2;
    return i - 1;
  }

  std::vector<PlanarPoint> pts_;
  std::vector<double> cum_;
};

/// Angle of the from->to direction in degrees, counterclockwise from +x,
/// in [0, 360).
inline double azimuth_deg(PlanarPoint from, PlanarPoint to, double eps = 1e-9) {
  const double dx = to.x - from.x, dy = to.y - from.y;
  if (std::hypot(dx, dy) < eps) {
    fail(Err::kDegeneratePoints, "azimuth of coincident points");
  }
  double deg = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

}  // namespace netmo

#pragma once

#include <cmath>

namespace csiloc {

/// Planar position in meters.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned site extent used to clamp predictions.
struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool valid() const { return x1 > x0 && y1 > y0; }
  Point2 clamp(Point2 p) const { return {std::fmin(std::fmax(p.x, x0), x1), std::fmin(std::fmax(p.y, y0), y1)}; }
  friend bool operator==(const Box&, const Box&) = default;
};

}  // namespace csiloc

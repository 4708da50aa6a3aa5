#ifndef METASURF_GEOMETRY_HPP
#define METASURF_GEOMETRY_HPP

#include <array>
#include <cmath>

namespace metasurf {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Twice the signed area of triangle (a, b, c); positive for CCW orientation.
inline double signed_area2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
}

inline double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * signed_area2(a, b, c);
}

// Normalized radius ratio 2*r_in/r_circ: 1 for equilateral, -> 0 for slivers.
inline double triangle_quality(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double la = (b - c).norm();
  const double lb = (c - a).norm();
  const double lc = (a - b).norm();
  const double s = 0.5 * (la + lb + lc);
  if (s <= 0.0) return 0.0;
  const double area = std::abs(triangle_area(a, b, c));
  if (area <= 0.0) return 0.0;
  const double r_in = area / s;
  const double r_circ = la * lb * lc / (4.0 * area);
  if (r_circ <= 0.0) return 0.0;
  return 2.0 * r_in / r_circ;
}

}  // namespace metasurf

#endif

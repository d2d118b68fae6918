#pragma once

#include <algorithm>
#include <cmath>

namespace nodnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  constexpr double squaredNorm() const { return x * x + y * y; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Position and velocity of a planar robot.
struct RobotState {
  Vec2 p;
  Vec2 v;
};

/// Axis-aligned rectangle [lo.x, hi.x] x [lo.y, hi.y].
struct Rect {
  Vec2 lo;
  Vec2 hi;

  constexpr bool contains(const Vec2& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  constexpr Vec2 center() const { return (lo + hi) * 0.5; }
  constexpr double area() const { return (hi.x - lo.x) * (hi.y - lo.y); }
};

/// Signed distance from p to the rectangle boundary; negative inside.
/// When grad is non-null it receives d(distance)/dp.
inline double signedDistance(const Rect& r, const Vec2& p, Vec2* grad = nullptr) {
  const Vec2 c = r.center();
  const Vec2 half = (r.hi - r.lo) * 0.5;
  const double qx = std::abs(p.x - c.x) - half.x;
  const double qy = std::abs(p.y - c.y) - half.y;
  const double sx = p.x >= c.x ? 1.0 : -1.0;
  const double sy = p.y >= c.y ? 1.0 : -1.0;
  if (qx > 0.0 || qy > 0.0) {
    const double ox = std::max(qx, 0.0);
    const double oy = std::max(qy, 0.0);
    const double d = std::sqrt(ox * ox + oy * oy);
    if (grad) *grad = Vec2{sx * ox / d, sy * oy / d};
    return d;
  }
  // Inside: distance to the nearest edge, negated.
  if (qx > qy) {
    if (grad) *grad = Vec2{sx, 0.0};
    return qx;
  }
  if (grad) *grad = Vec2{0.0, sy};
  return qy;
}

}  // namespace nodnav

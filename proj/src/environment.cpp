#include "nodnav/environment.hpp"

#include <bit>
#include <limits>

namespace nodnav {

Environment Environment::corridor_world() {
  Environment env;
  env.bounds = {{-8.0, -4.0}, {8.0, 4.0}};
  const double wall = 0.5;
  env.obstacles = {
      {{-8.0, 4.0 - wall}, {8.0, 4.0}},     // top
      {{-8.0, -4.0}, {8.0, -4.0 + wall}},   // bottom
      {{-8.0, -4.0}, {-8.0 + wall, 4.0}},   // left
      {{8.0 - wall, -4.0}, {8.0, 4.0}},     // right
      {{-3.0, 0.5}, {3.0, 4.0 - wall}},     // above the corridor
      {{-3.0, -4.0 + wall}, {3.0, -0.5}},   // below the corridor
  };
  env.corridor = {{-3.0, -0.5}, {3.0, 0.5}};
  env.entrance_left = {-3.0, 0.0};
  env.entrance_right = {3.0, 0.0};
  return env;
}

double Environment::clearance(const Vec2& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Rect& r : obstacles) best = std::min(best, signedDistance(r, p));
  // Bounds act as a wall of infinite thickness.
  best = std::min({best, p.x - bounds.lo.x, bounds.hi.x - p.x, p.y - bounds.lo.y,
                   bounds.hi.y - p.y});
  return best - robot_radius;
}

bool Environment::is_free(const Vec2& p) const { return clearance(p) >= 0.0; }

Side Environment::side_of(const Vec2& p) const {
  if (p.x <= corridor.lo.x) return Side::Left;
  if (p.x >= corridor.hi.x) return Side::Right;
  return Side::Inside;
}

Rect Environment::sampling_box() const {
  return {{bounds.lo.x + robot_radius, bounds.lo.y + robot_radius},
          {bounds.hi.x - robot_radius, bounds.hi.y - robot_radius}};
}

Rect Environment::corridor_band() const {
  return {{corridor.lo.x, corridor.lo.y + robot_radius},
          {corridor.hi.x, corridor.hi.y - robot_radius}};
}

std::uint64_t Environment::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  auto mix_rect = [&mix](const Rect& r) {
    mix(r.lo.x); mix(r.lo.y); mix(r.hi.x); mix(r.hi.y);
  };
  mix_rect(bounds);
  for (const Rect& r : obstacles) mix_rect(r);
  mix_rect(corridor);
  mix(entrance_left.x); mix(entrance_left.y);
  mix(entrance_right.x); mix(entrance_right.y);
  mix(robot_radius);
  mix(v_max);
  return h;
}

}  // namespace nodnav

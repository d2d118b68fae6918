#pragma once

#include <cstdint>
#include <vector>

#include "nodnav/geometry.hpp"

namespace nodnav {

enum class Side { Left, Right, Inside };

/// Two rooms joined by a corridor that fits a single robot at a time.
struct Environment {
  Rect bounds;
  std::vector<Rect> obstacles;  // walls, including the perimeter
  Rect corridor;                // passage region
  Vec2 entrance_left;
  Vec2 entrance_right;
  double robot_radius = 0.3;
  double v_max = 1.0;

  /// 16 m x 8 m world, 0.5 m perimeter walls, 1 m wide corridor over x in [-3, 3].
  static Environment corridor_world();

  /// Disk of robot_radius centred at p lies inside bounds and clear of obstacles.
  bool is_free(const Vec2& p) const;
  /// Smallest signed clearance between the robot disk and any obstacle.
  double clearance(const Vec2& p) const;

  /// Inside when the centre lies strictly between the corridor's short edges.
  Side side_of(const Vec2& p) const;
  bool in_corridor(const Vec2& p) const { return side_of(p) == Side::Inside; }
  const Vec2& entrance(Side s) const { return s == Side::Right ? entrance_right : entrance_left; }

  /// Axis-aligned box containing every free robot centre.
  Rect sampling_box() const;
  /// Box of free centres inside the corridor band.
  Rect corridor_band() const;

  std::uint64_t hash() const;
};

}  // namespace nodnav

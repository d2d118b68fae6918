#pragma once

// Receding-horizon tracking with a clamped cubic B-spline: follows the
// robot's roadmap trajectory while keeping clear of walls and of the paths
// predicted for other robots.

#include <cstddef>
#include <span>
#include <vector>

#include "nodnav/environment.hpp"
#include "nodnav/geometry.hpp"
#include "nodnav/planner.hpp"
#include "nodnav/strategy_game.hpp"

namespace nodnav::mpc {

struct MpcParams {
  double horizon = 0.8;
  double w2 = 1e-6;
  int n_ctrl = 8;
  int collision_samples = 20;
  int quadrature_intervals = 40;   // Simpson, even
  double separation_margin = 0.02;  // added to 2 r inside the penalty
  double clearance_margin = 0.01;   // added to r inside the penalty
  double tick = 0.1;                // execution step checked by the one-tick guard
  double speed_margin = 0.02;       // subtracted from v_max inside the penalty

  void validate() const;
};

/// Degree-3 spline with clamped uniform knots over [t0, t0 + horizon].
struct BSplineTrajectory {
  double t0 = 0.0;
  double horizon = 0.8;
  std::vector<Vec2> control_points;

  std::vector<double> knots() const;
};

/// Position by de Boor's algorithm and velocity from the derivative spline.
RobotState spline_eval(const BSplineTrajectory& traj, double tau);

/// All basis functions and their derivatives at tau (absolute time).
void basis_functions(const BSplineTrajectory& traj, double tau, std::vector<double>& N,
                     std::vector<double>& dN);

/// A single robot's path: a slot of a joint path, or a fixed point.
struct PathView {
  const planner::JointPath* path = nullptr;
  std::size_t slot = 0;
  Vec2 fixed;

  static PathView stationary(Vec2 p) { return {nullptr, 0, p}; }
  RobotState at(double t) const { return path ? path->state(slot, t) : RobotState{fixed, {}}; }
};

/// Game players follow the owner's plan slice; everyone else is static at
/// their current position.
PathView predicted_path_of(int other, const game::GamePlayerSet& players,
                           const planner::JointPath& plan, std::span<const int> plan_robots,
                           std::span<const RobotState> current);

struct MpcInput {
  double t = 0.0;
  RobotState current;
  PathView reference;
  std::vector<PathView> predicted;   // one per other robot
  std::vector<Vec2> others_now;      // current positions of the same robots
  std::vector<Vec2> warm_start;      // previous solution's control points, may be empty
};

/// Penalized objective over the free control points (all but the first two).
class MpcProblem {
 public:
  MpcProblem(const MpcInput& input, const Environment& env, const MpcParams& params);

  std::size_t dimension() const { return 2 * free_; }
  double objective(std::span<const double> x, double rho) const;
  std::vector<double> gradient(std::span<const double> x, double rho) const;
  /// Tracking part only (no penalties).
  double tracking_cost(std::span<const double> x) const;

  std::vector<double> unconstrained_optimum() const;
  /// Gauss-Newton with increasing penalty weight, starting from x.
  std::vector<double> solve(std::vector<double> x, int* iterations = nullptr) const;

  BSplineTrajectory trajectory(std::span<const double> x) const;
  std::vector<double> free_variables(const BSplineTrajectory& traj) const;
  const BSplineTrajectory& hold() const { return hold_; }

 private:
  struct Sample {
    double tau;
    std::vector<double> N;
    std::vector<double> dN;
    std::size_t lo = 2, hi = 2;  // free control points with nonzero basis value
  };
  Vec2 position(const Sample& s, std::span<const double> x) const;
  Vec2 velocity(const Sample& s, std::span<const double> x) const;
  /// Calls f(basis, g, dg) for every violated constraint.
  template <class F>
  void visit_active(std::span<const double> x, F&& f) const;
  std::vector<double> tracking_gradient(std::span<const double> x) const;
  void accumulate_gradient(const std::vector<double>& basis, Vec2 dg, std::vector<double>& grad) const;

  const Environment& env_;
  MpcParams params_;
  MpcInput input_;
  std::size_t n_ctrl_;
  std::size_t free_;
  std::vector<Sample> quad_;
  std::vector<double> quad_w_;
  std::vector<Vec2> ref_;
  std::vector<Sample> coll_;
  std::vector<std::vector<Vec2>> pred_;  // [sample][other]
  Sample tick_;
  Vec2 p0_, p1_;
  BSplineTrajectory hold_;
  std::vector<double> H0_;  // free_ x free_, shared by both coordinates
  // tracking_cost(x) = sum over coordinates of x' H0 x + 2 lin' x + constant
  std::vector<double> lin_;  // 2 free_
  double const_ = 0.0;
};

/// Independent check of the hard constraints at the collision samples
/// (separation 2 r, clearance 0, speed v_max) and of the one-tick guard.
bool verify_trajectory(const BSplineTrajectory& traj, const MpcInput& input,
                       const Environment& env, const MpcParams& params);

/// Whether a step from `from` to `to` keeps the one-tick guard against others at `others_now`.
bool step_is_safe(Vec2 from, Vec2 to, std::span<const Vec2> others_now, double robot_radius,
                  double v_max, double tick);

struct MpcResult {
  BSplineTrajectory trajectory;
  bool infeasible = false;
  bool repaired = false;
  int iterations = 0;
};

MpcResult solve_mpc(const MpcInput& input, const Environment& env, const MpcParams& params);

}  // namespace nodnav::mpc

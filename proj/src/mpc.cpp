#include "nodnav/mpc.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nodnav::mpc {

namespace {
constexpr int kDegree = 3;
}

void MpcParams::validate() const {
  if (!(horizon > 0.0)) throw std::invalid_argument("mpc: horizon must be positive");
  if (n_ctrl < kDegree + 2) throw std::invalid_argument("mpc: n_ctrl must be at least 5");
  if (collision_samples < 1) throw std::invalid_argument("mpc: collision_samples must be positive");
  if (quadrature_intervals < 2 || quadrature_intervals % 2)
    throw std::invalid_argument("mpc: quadrature_intervals must be even");
  if (!(w2 >= 0.0)) throw std::invalid_argument("mpc: w2 must be nonnegative");
  if (!(tick > 0.0)) throw std::invalid_argument("mpc: tick must be positive");
  if (!(speed_margin >= 0.0)) throw std::invalid_argument("mpc: speed_margin must be nonnegative");
}

std::vector<double> BSplineTrajectory::knots() const {
  const auto n = static_cast<int>(control_points.size());
  if (n < kDegree + 1) throw std::invalid_argument("BSplineTrajectory: too few control points");
  const int spans = n - kDegree;
  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(n + kDegree + 1));
  for (int i = 0; i < kDegree; ++i) u.push_back(t0);
  for (int i = 0; i <= spans; ++i) u.push_back(t0 + horizon * i / spans);
  for (int i = 0; i < kDegree; ++i) u.push_back(t0 + horizon);
  return u;
}

namespace {

// Index k with u[k] <= tau < u[k + 1], using the last non-empty span at the end.
std::size_t find_span(const std::vector<double>& u, std::size_t n_ctrl, int degree, double tau) {
  if (tau >= u[n_ctrl]) return n_ctrl - 1;
  const auto it = std::upper_bound(u.begin() + degree, u.begin() + static_cast<std::ptrdiff_t>(n_ctrl) + 1, tau);
  return static_cast<std::size_t>(it - u.begin()) - 1;
}

void check_span(const BSplineTrajectory& traj, double tau) {
  const double tol = 1e-12 * std::max(1.0, std::abs(traj.t0) + traj.horizon);
  if (!(tau >= traj.t0 - tol && tau <= traj.t0 + traj.horizon + tol))
    throw std::invalid_argument("spline_eval: time outside the spline's span");
}

Vec2 de_boor(const std::vector<double>& u, const std::vector<Vec2>& P, int p, double tau) {
  const std::size_t k = find_span(u, P.size(), p, tau);
  std::vector<Vec2> d(static_cast<std::size_t>(p + 1));
  for (int j = 0; j <= p; ++j) d[static_cast<std::size_t>(j)] = P[k - static_cast<std::size_t>(p) + static_cast<std::size_t>(j)];
  for (int r = 1; r <= p; ++r) {
    for (int j = p; j >= r; --j) {
      const std::size_t i = k - static_cast<std::size_t>(p) + static_cast<std::size_t>(j);
      const double denom = u[i + static_cast<std::size_t>(p - r) + 1] - u[i];
      const double a = denom > 0.0 ? (tau - u[i]) / denom : 0.0;
      d[static_cast<std::size_t>(j)] = d[static_cast<std::size_t>(j - 1)] * (1.0 - a) + d[static_cast<std::size_t>(j)] * a;
    }
  }
  return d[static_cast<std::size_t>(p)];
}

}  // namespace

RobotState spline_eval(const BSplineTrajectory& traj, double tau) {
  check_span(traj, tau);
  tau = std::clamp(tau, traj.t0, traj.t0 + traj.horizon);
  const auto u = traj.knots();
  const auto& P = traj.control_points;
  RobotState s;
  s.p = de_boor(u, P, kDegree, tau);
  // Derivative spline: degree 2 over the inner knots.
  std::vector<Vec2> Q(P.size() - 1);
  for (std::size_t i = 0; i + 1 < P.size(); ++i)
    Q[i] = (P[i + 1] - P[i]) * (kDegree / (u[i + kDegree + 1] - u[i + 1]));
  const std::vector<double> inner(u.begin() + 1, u.end() - 1);
  s.v = de_boor(inner, Q, kDegree - 1, tau);
  return s;
}

void basis_functions(const BSplineTrajectory& traj, double tau, std::vector<double>& N,
                     std::vector<double>& dN) {
  check_span(traj, tau);
  tau = std::clamp(tau, traj.t0, traj.t0 + traj.horizon);
  const auto u = traj.knots();
  const std::size_t n = traj.control_points.size();
  const int p = kDegree;
  const std::size_t k = find_span(u, n, p, tau);
  // ndu[r][j]: degree-j basis values (upper triangle) and knot differences (lower).
  double ndu[kDegree + 1][kDegree + 1];
  double left[kDegree + 1], right[kDegree + 1];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = tau - u[k + 1 - static_cast<std::size_t>(j)];
    right[j] = u[k + static_cast<std::size_t>(j)] - tau;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  N.assign(n, 0.0);
  dN.assign(n, 0.0);
  const std::size_t first = k - static_cast<std::size_t>(p);
  for (int r = 0; r <= p; ++r) N[first + static_cast<std::size_t>(r)] = ndu[r][p];
  // Degree p-1 values are nonzero for indices k-p+1 .. k.
  auto lower = [&](std::size_t i) -> double {
    if (i + static_cast<std::size_t>(p) - 1 < k || i > k) return 0.0;
    return ndu[i - (k - static_cast<std::size_t>(p) + 1)][p - 1];
  };
  for (int r = 0; r <= p; ++r) {
    const std::size_t i = first + static_cast<std::size_t>(r);
    double d = 0.0;
    const double a = u[i + static_cast<std::size_t>(p)] - u[i];
    const double b = u[i + static_cast<std::size_t>(p) + 1] - u[i + 1];
    if (a > 0.0) d += p * lower(i) / a;
    if (b > 0.0) d -= p * lower(i + 1) / b;
    dN[i] = d;
  }
}

PathView predicted_path_of(int other, const game::GamePlayerSet& players,
                           const planner::JointPath& plan, std::span<const int> plan_robots,
                           std::span<const RobotState> current) {
  if (players.contains(other)) {
    const auto it = std::find(plan_robots.begin(), plan_robots.end(), other);
    if (it != plan_robots.end() && plan.robots() == plan_robots.size())
      return {&plan, static_cast<std::size_t>(it - plan_robots.begin()), {}};
  }
  return PathView::stationary(current[static_cast<std::size_t>(other)].p);
}

bool step_is_safe(Vec2 from, Vec2 to, std::span<const Vec2> others_now, double robot_radius,
                  double v_max, double tick) {
  const double reach = 2.0 * robot_radius + v_max * tick;
  for (const Vec2& q : others_now) {
    const Vec2 rel = from - q;
    if (rel.norm() >= reach) {
      if (distance(to, q) < reach) return false;
    } else if ((to - from).dot(rel) < 0.0) {
      return false;
    }
  }
  return true;
}

namespace {

// Signed clearance of the robot disk with its gradient. Values at or above
// cutoff are reported as cutoff without a gradient.
double clearance_with_gradient(const Environment& env, Vec2 p, Vec2& grad, double cutoff) {
  double best = cutoff + env.robot_radius;
  grad = {};
  for (const Rect& r : env.obstacles) {
    // max(qx, qy) bounds the signed distance from below.
    const double qx = std::max(r.lo.x - p.x, p.x - r.hi.x);
    const double qy = std::max(r.lo.y - p.y, p.y - r.hi.y);
    if (std::max(qx, qy) >= best) continue;
    Vec2 g;
    const double d = signedDistance(r, p, &g);
    if (d < best) {
      best = d;
      grad = g;
    }
  }
  const std::pair<double, Vec2> walls[] = {{p.x - env.bounds.lo.x, {1, 0}},
                                           {env.bounds.hi.x - p.x, {-1, 0}},
                                           {p.y - env.bounds.lo.y, {0, 1}},
                                           {env.bounds.hi.y - p.y, {0, -1}}};
  for (const auto& [d, g] : walls)
    if (d < best) {
      best = d;
      grad = g;
    }
  return best - env.robot_radius;
}

std::vector<double> collision_times(const MpcParams& params) {
  std::vector<double> taus;
  for (int c = 1; c <= params.collision_samples; ++c)
    taus.push_back(params.horizon * c / params.collision_samples);
  if (params.tick < params.horizon) taus.push_back(params.tick);
  return taus;
}

}  // namespace

MpcProblem::MpcProblem(const MpcInput& input, const Environment& env, const MpcParams& params)
    : env_(env), params_(params), input_(input) {
  params_.validate();
  if (input.predicted.size() != input.others_now.size())
    throw std::invalid_argument("MpcProblem: predicted paths and current positions differ in count");
  n_ctrl_ = static_cast<std::size_t>(params.n_ctrl);
  free_ = n_ctrl_ - 2;

  hold_.t0 = input.t;
  hold_.horizon = params.horizon;
  hold_.control_points.assign(n_ctrl_, input.current.p);
  const auto u = hold_.knots();
  p0_ = input.current.p;
  p1_ = p0_ + input.current.v * ((u[kDegree + 1] - u[1]) / kDegree);

  auto make_sample = [&](double tau) {
    Sample s;
    s.tau = tau;
    basis_functions(hold_, input.t + tau, s.N, s.dN);
    s.lo = n_ctrl_;
    s.hi = 2;
    for (std::size_t i = 2; i < n_ctrl_; ++i)
      if (s.N[i] != 0.0 || s.dN[i] != 0.0) {
        s.lo = std::min(s.lo, i);
        s.hi = i + 1;
      }
    if (s.lo > s.hi) s.lo = s.hi;
    return s;
  };
  const int Q = params.quadrature_intervals;
  const double h = params.horizon / Q;
  for (int q = 0; q <= Q; ++q) {
    quad_.push_back(make_sample(h * q));
    const double w = (q == 0 || q == Q) ? 1.0 : (q % 2 ? 4.0 : 2.0);
    quad_w_.push_back(w * h / 3.0);
    ref_.push_back(input.reference.at(input.t + h * q).p);
  }
  for (double tau : collision_times(params_)) {
    coll_.push_back(make_sample(tau));
    std::vector<Vec2> others;
    for (const PathView& v : input.predicted) others.push_back(v.at(input.t + tau).p);
    pred_.push_back(std::move(others));
  }
  tick_ = make_sample(std::min(params.tick, params.horizon));

  H0_.assign(free_ * free_, 0.0);
  for (std::size_t q = 0; q < quad_.size(); ++q)
    for (std::size_t i = 0; i < free_; ++i)
      for (std::size_t j = 0; j < free_; ++j)
        H0_[i * free_ + j] += quad_w_[q] * (quad_[q].N[i + 2] * quad_[q].N[j + 2] +
                                            params.w2 * quad_[q].dN[i + 2] * quad_[q].dN[j + 2]);
  lin_.assign(2 * free_, 0.0);
  for (std::size_t q = 0; q < quad_.size(); ++q) {
    const Sample& s = quad_[q];
    const Vec2 e = p0_ * s.N[0] + p1_ * s.N[1] - ref_[q];
    const Vec2 v = p0_ * s.dN[0] + p1_ * s.dN[1];
    const_ += quad_w_[q] * (e.squaredNorm() + params.w2 * v.squaredNorm());
    for (std::size_t i = 0; i < free_; ++i) {
      lin_[i] += quad_w_[q] * (s.N[i + 2] * e.x + params.w2 * s.dN[i + 2] * v.x);
      lin_[free_ + i] += quad_w_[q] * (s.N[i + 2] * e.y + params.w2 * s.dN[i + 2] * v.y);
    }
  }
}

Vec2 MpcProblem::position(const Sample& s, std::span<const double> x) const {
  Vec2 p = p0_ * s.N[0] + p1_ * s.N[1];
  for (std::size_t i = s.lo; i < s.hi; ++i) p += Vec2{x[i - 2], x[free_ + i - 2]} * s.N[i];
  return p;
}

Vec2 MpcProblem::velocity(const Sample& s, std::span<const double> x) const {
  Vec2 v = p0_ * s.dN[0] + p1_ * s.dN[1];
  for (std::size_t i = s.lo; i < s.hi; ++i) v += Vec2{x[i - 2], x[free_ + i - 2]} * s.dN[i];
  return v;
}

void MpcProblem::accumulate_gradient(const std::vector<double>& basis, Vec2 dg,
                                     std::vector<double>& grad) const {
  for (std::size_t i = 0; i < free_; ++i) {
    grad[i] += dg.x * basis[i + 2];
    grad[free_ + i] += dg.y * basis[i + 2];
  }
}

double MpcProblem::tracking_cost(std::span<const double> x) const {
  double total = const_;
  for (std::size_t c = 0; c < 2; ++c) {
    const double* xc = x.data() + c * free_;
    for (std::size_t i = 0; i < free_; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < free_; ++j) row += H0_[i * free_ + j] * xc[j];
      total += xc[i] * (row + 2.0 * lin_[c * free_ + i]);
    }
  }
  return total;
}

template <class F>
void MpcProblem::visit_active(std::span<const double> x, F&& f) const {
  const double r = env_.robot_radius;
  auto add = [&](const std::vector<double>& basis, double g, Vec2 dg) {
    if (g > 0.0) f(basis, g, dg);
  };
  // Speed bound at the collision samples, so nothing can be skipped between them.
  const double v_lim = env_.v_max - params_.speed_margin;
  for (const Sample& s : coll_) {
    const Vec2 v = velocity(s, x);
    const double speed = v.norm();
    if (speed > 1e-12) add(s.dN, speed - v_lim, v / speed);
  }
  for (std::size_t c = 0; c < coll_.size(); ++c) {
    const Vec2 p = position(coll_[c], x);
    for (const Vec2& q : pred_[c]) {
      const Vec2 rel = p - q;
      const double d = rel.norm();
      const Vec2 dir = d > 1e-12 ? rel / d : Vec2{1.0, 0.0};
      add(coll_[c].N, 2.0 * r + params_.separation_margin - d, -dir);
    }
    Vec2 grad;
    const double clear = clearance_with_gradient(env_, p, grad, params_.clearance_margin);
    add(coll_[c].N, params_.clearance_margin - clear, -grad);
  }
  // One-tick guard against the others' current positions.
  const Vec2 pt = position(tick_, x);
  const double reach = 2.0 * r + env_.v_max * params_.tick;
  for (const Vec2& q : input_.others_now) {
    const Vec2 rel0 = p0_ - q;
    const double d0 = rel0.norm();
    if (d0 >= reach) {
      const Vec2 rel = pt - q;
      const double d = rel.norm();
      const Vec2 dir = d > 1e-12 ? rel / d : Vec2{1.0, 0.0};
      add(tick_.N, reach + 0.005 - d, -dir);
    } else if (d0 > 1e-12) {
      const Vec2 n = rel0 / d0;
      add(tick_.N, 1e-4 - (pt - p0_).dot(n), -n);
    }
  }
}

double MpcProblem::objective(std::span<const double> x, double rho) const {
  double penalty = 0.0;
  visit_active(x, [&](const std::vector<double>&, double g, Vec2) { penalty += g * g; });
  return tracking_cost(x) + rho * penalty;
}

std::vector<double> MpcProblem::gradient(std::span<const double> x, double rho) const {
  std::vector<double> grad = tracking_gradient(x);
  visit_active(x, [&](const std::vector<double>& basis, double g, Vec2 dg) {
    accumulate_gradient(basis, dg * (2.0 * rho * g), grad);
  });
  return grad;
}

std::vector<double> MpcProblem::tracking_gradient(std::span<const double> x) const {
  std::vector<double> grad(2 * free_, 0.0);
  for (std::size_t c = 0; c < 2; ++c) {
    const double* xc = x.data() + c * free_;
    for (std::size_t i = 0; i < free_; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < free_; ++j) row += H0_[i * free_ + j] * xc[j];
      grad[c * free_ + i] = 2.0 * (row + lin_[c * free_ + i]);
    }
  }
  return grad;
}

std::vector<double> MpcProblem::unconstrained_optimum() const {
  const std::vector<double> zero(2 * free_, 0.0);
  const std::vector<double> g0 = gradient(zero, 0.0);
  Eigen::MatrixXd H(free_, free_);
  for (std::size_t i = 0; i < free_; ++i)
    for (std::size_t j = 0; j < free_; ++j) H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 2.0 * H0_[i * free_ + j];
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  Eigen::VectorXd gx(free_), gy(free_);
  for (std::size_t i = 0; i < free_; ++i) {
    gx(static_cast<Eigen::Index>(i)) = g0[i];
    gy(static_cast<Eigen::Index>(i)) = g0[free_ + i];
  }
  const Eigen::VectorXd sx = ldlt.solve(-gx), sy = ldlt.solve(-gy);
  std::vector<double> x(2 * free_);
  for (std::size_t i = 0; i < free_; ++i) {
    x[i] = sx(static_cast<Eigen::Index>(i));
    x[free_ + i] = sy(static_cast<Eigen::Index>(i));
  }
  return x;
}

std::vector<double> MpcProblem::solve(std::vector<double> x, int* iterations) const {
  const auto n = static_cast<Eigen::Index>(2 * free_);
  Eigen::MatrixXd H0 = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < free_; ++i)
    for (std::size_t j = 0; j < free_; ++j) {
      const double v = 2.0 * H0_[i * free_ + j];
      H0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      H0(static_cast<Eigen::Index>(free_ + i), static_cast<Eigen::Index>(free_ + j)) = v;
    }
  int iters = 0;
  const auto feasible = [&](std::span<const double> y) {
    bool none = true;
    visit_active(y, [&](const std::vector<double>&, double, Vec2) { none = false; });
    return none;
  };
  for (double rho = 1e2; rho <= 1e7; rho *= 10.0) {
    for (int it = 0; it < 10; ++it) {
      ++iters;
      std::vector<double> grad = tracking_gradient(x);
      Eigen::MatrixXd H = H0;
      Eigen::VectorXd J(n);
      visit_active(x, [&](const std::vector<double>& basis, double g, Vec2 dg) {
        for (std::size_t i = 0; i < free_; ++i) {
          J(static_cast<Eigen::Index>(i)) = dg.x * basis[i + 2];
          J(static_cast<Eigen::Index>(free_ + i)) = dg.y * basis[i + 2];
        }
        H.noalias() += 2.0 * rho * J * J.transpose();
        for (Eigen::Index i = 0; i < n; ++i) grad[static_cast<std::size_t>(i)] += 2.0 * rho * g * J(i);
      });
      const Eigen::Map<const Eigen::VectorXd> g(grad.data(), n);
      const Eigen::VectorXd step = H.ldlt().solve(-g);
      const double f0 = objective(x, rho);
      const double slope = g.dot(step);
      double s = 1.0;
      std::vector<double> trial(x.size());
      bool moved = false;
      while (s > 1e-4) {
        for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + s * step(static_cast<Eigen::Index>(i));
        if (objective(trial, rho) <= f0 + 1e-4 * s * slope) {
          moved = true;
          break;
        }
        s *= 0.5;
      }
      if (!moved) break;
      x = trial;
      if (s * step.lpNorm<Eigen::Infinity>() < 1e-7) break;
    }
    if (feasible(x)) break;
  }
  if (iterations) *iterations = iters;
  return x;
}

BSplineTrajectory MpcProblem::trajectory(std::span<const double> x) const {
  BSplineTrajectory traj = hold_;
  traj.control_points[0] = p0_;
  traj.control_points[1] = p1_;
  for (std::size_t i = 0; i < free_; ++i) traj.control_points[i + 2] = {x[i], x[free_ + i]};
  return traj;
}

std::vector<double> MpcProblem::free_variables(const BSplineTrajectory& traj) const {
  std::vector<double> x(2 * free_);
  for (std::size_t i = 0; i < free_; ++i) {
    x[i] = traj.control_points[i + 2].x;
    x[free_ + i] = traj.control_points[i + 2].y;
  }
  return x;
}

bool verify_trajectory(const BSplineTrajectory& traj, const MpcInput& input,
                       const Environment& env, const MpcParams& params) {
  const double sep = 2.0 * env.robot_radius * (1.0 - 1e-9);
  for (double tau : collision_times(params)) {
    const RobotState s = spline_eval(traj, input.t + tau);
    const Vec2 p = s.p;
    if (env.clearance(p) < -1e-12) return false;
    if (s.v.norm() > env.v_max * (1.0 + 1e-9)) return false;
    for (const PathView& other : input.predicted)
      if (distance(p, other.at(input.t + tau).p) < sep) return false;
  }
  const Vec2 next = spline_eval(traj, input.t + std::min(params.tick, params.horizon)).p;
  return step_is_safe(input.current.p, next, input.others_now, env.robot_radius, env.v_max,
                      params.tick);
}

MpcResult solve_mpc(const MpcInput& input, const Environment& env, const MpcParams& params) {
  const MpcProblem problem(input, env, params);
  MpcResult result;
  auto x = problem.unconstrained_optimum();
  // No constraint binds at the unconstrained optimum: it is the solution.
  const bool binds = problem.objective(x, 1.0) > problem.tracking_cost(x);
  if (binds) x = problem.solve(std::move(x), &result.iterations);
  result.trajectory = problem.trajectory(x);
  bool ok = verify_trajectory(result.trajectory, input, env, params);
  if (binds) {
    // Constraints bind: also descend from holding still, which keeps to the
    // near side of whatever blocks the reference, and from the previous
    // solution; keep the best verified result.
    std::vector<std::vector<double>> starts{problem.free_variables(problem.hold())};
    if (input.warm_start.size() == problem.hold().control_points.size()) {
      BSplineTrajectory prev = problem.hold();
      prev.control_points = input.warm_start;
      starts.push_back(problem.free_variables(prev));
    }
    double best = problem.tracking_cost(x);
    for (const auto& start : starts) {
      int more = 0;
      const auto y = problem.solve(start, &more);
      result.iterations += more;
      BSplineTrajectory alt = problem.trajectory(y);
      const bool alt_ok = verify_trajectory(alt, input, env, params);
      const double cost = problem.tracking_cost(y);
      if ((alt_ok && !ok) || (alt_ok == ok && cost < best)) {
        result.trajectory = std::move(alt);
        ok = alt_ok;
        best = cost;
      }
    }
  }
  if (ok) return result;

  // Shrink toward holding at the current position, keeping the initial state.
  result.repaired = true;
  const Vec2 p0 = input.current.p;
  const BSplineTrajectory best = result.trajectory;
  for (double lambda : {0.8, 0.6, 0.4, 0.2, 0.0}) {
    BSplineTrajectory blended = best;
    for (std::size_t i = 2; i < blended.control_points.size(); ++i)
      blended.control_points[i] = p0 + (best.control_points[i] - p0) * lambda;
    if (verify_trajectory(blended, input, env, params)) {
      result.trajectory = std::move(blended);
      return result;
    }
  }
  result.infeasible = true;
  result.trajectory = problem.hold();
  return result;
}

}  // namespace nodnav::mpc

#pragma once

// Radial Dirichlet problems v'' + (N-1)(log sigma)' v' + F(v) = 0,
// v'(0) = v(R) = 0, and the first Dirichlet eigenpair, by shooting.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "warpconcave/errors.hpp"
#include "warpconcave/radial_profile.hpp"
#include "warpconcave/warped_geometry.hpp"

namespace warpconcave {

struct EigenSolution {
  double lambda1;
  RadialProfile profile;  ///< normalized so that v(0) = 1
  double rayleigh;
  /// (lambda, first zero) pairs visited by the bisection; the zero is +inf
  /// when v stays positive on (0, R].
  std::vector<std::pair<double, double>> sturm_history;
};

namespace detail {

// (log sigma)' tabulated at the nodes r_i (i >= 1) and at the midpoints
// r_i + h/2, so repeated shots do not re-evaluate the factor.
class RadialShooter {
 public:
  RadialShooter(const Ball& ball, std::size_t M)
      : N_(ball.dimension()), M_(M), r_(uniform_grid(ball.radius(), M)), h_(r_[1]) {
    d1_node_.assign(M + 1, 0.0);
    d1_mid_.assign(M, 0.0);
    for (std::size_t i = 1; i <= M; ++i) d1_node_[i] = log_sigma_derivs(ball.factor(), r_[i]).d1;
    for (std::size_t i = 1; i < M; ++i) d1_mid_[i] = log_sigma_derivs(ball.factor(), r_[i] + 0.5 * h_).d1;
  }

  const std::vector<double>& grid() const { return r_; }
  double step() const { return h_; }
  int dimension() const { return N_; }

  struct Trajectory {
    std::vector<double> v;
    std::vector<double> dv;
  };

  struct ShotResult {
    double end_value;   // v(R)
    double first_zero;  // +inf when v > 0 on (0, R]
  };

  // Integrates from the Taylor start at r = h to r = R with classical RK4.
  template <class F>
  ShotResult shoot(double v0, F&& f, Trajectory* out = nullptr, bool stop_at_zero = false) const {
    const double k = N_ - 1.0;
    const double f0 = f(v0);
    double v = v0 - f0 * h_ * h_ / (2.0 * N_);
    double p = -f0 * h_ / N_;
    if (out) {
      out->v.assign(M_ + 1, 0.0);
      out->dv.assign(M_ + 1, 0.0);
      out->v[0] = v0;
      out->v[1] = v;
      out->dv[1] = p;
    }
    double zero = std::numeric_limits<double>::infinity();
    if (v <= 0.0) zero = h_;
    for (std::size_t i = 1; i < M_ && !(stop_at_zero && std::isfinite(zero)); ++i) {
      const double a0 = d1_node_[i], am = d1_mid_[i], a1 = d1_node_[i + 1];
      const double kv1 = p, kp1 = -k * a0 * p - f(v);
      const double v2 = v + 0.5 * h_ * kv1, p2 = p + 0.5 * h_ * kp1;
      const double kv2 = p2, kp2 = -k * am * p2 - f(v2);
      const double v3 = v + 0.5 * h_ * kv2, p3 = p + 0.5 * h_ * kp2;
      const double kv3 = p3, kp3 = -k * am * p3 - f(v3);
      const double v4 = v + h_ * kv3, p4 = p + h_ * kp3;
      const double kv4 = p4, kp4 = -k * a1 * p4 - f(v4);
      const double vn = v + h_ / 6.0 * (kv1 + 2 * kv2 + 2 * kv3 + kv4);
      const double pn = p + h_ / 6.0 * (kp1 + 2 * kp2 + 2 * kp3 + kp4);
      if (!std::isfinite(zero) && vn <= 0.0) zero = hermite_zero(r_[i], v, p, vn, pn);
      v = vn;
      p = pn;
      if (out) {
        out->v[i + 1] = v;
        out->dv[i + 1] = p;
      }
    }
    return {v, zero};
  }

 private:
  // Root of the cubic Hermite interpolant on [r0, r0 + h] with v(r0) > 0 >= v(r0 + h).
  double hermite_zero(double r0, double va, double pa, double vb, double pb) const {
    auto H = [&](double x) {
      const double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
      const double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
      return h00 * va + h10 * h_ * pa + h01 * vb + h11 * h_ * pb;
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (H(mid) > 0.0 ? lo : hi) = mid;
    }
    return r0 + h_ * 0.5 * (lo + hi);
  }

  int N_;
  std::size_t M_;
  std::vector<double> r_;
  double h_;
  std::vector<double> d1_node_;
  std::vector<double> d1_mid_;
};

inline void check_shooting_inputs(const Ball& ball, double tol, std::size_t M) {
  if (!(tol > 0.0)) throw ContractViolation("tolerance must be positive");
  if (M < 8) throw ContractViolation("grid size M must be at least 8");
  if (!check_condition(ball, ConditionId::c2_necessary).holds) {
    throw ContractViolation("ball fails the strong-convexity necessary condition sigma' > 0");
  }
}

// Assembles the profile from a trajectory: v'' from the ODE, v_M pinned to 0.
template <class F>
RadialProfile assemble_profile(const RadialShooter& shooter, const Ball& ball,
                               RadialShooter::Trajectory traj, F&& f, std::string problem, double parameter) {
  RadialProfile prof;
  prof.r = shooter.grid();
  const std::size_t n = prof.r.size();
  prof.d2v.assign(n, 0.0);
  const int N = ball.dimension();
  prof.d2v[0] = -f(traj.v[0]) / N;
  for (std::size_t i = 1; i < n; ++i) {
    const double d1 = log_sigma_derivs(ball.factor(), prof.r[i]).d1;
    prof.d2v[i] = -(N - 1.0) * d1 * traj.dv[i] - f(traj.v[i]);
  }
  prof.residual = traj.v.back();
  traj.v.back() = 0.0;
  prof.v = std::move(traj.v);
  prof.dv = std::move(traj.dv);
  prof.problem = std::move(problem);
  prof.shooting_parameter = parameter;
  return prof;
}

}  // namespace detail

/// Solves v'' + (N-1)(log sigma)' v' + F(v) = 0, v'(0) = v(R) = 0 with v > 0
/// inside, by shooting on v(0).
///
/// F is evaluated at max(v, 0) so trajectories may overshoot the boundary.
/// The shooting map v0 -> v(R) is bracketed on [v_lo, v_hi], starting from
/// [1e-8, 1] and widening geometrically in either direction until the sign
/// changes; the root is then refined to machine precision.
template <class F>
  requires std::invocable<F&, double>
RadialProfile solve_dirichlet_bvp(const Ball& ball, F&& nonlinearity, double tol = 1e-8, std::size_t M = 4096,
                                  std::string problem = "E") {
  detail::check_shooting_inputs(ball, tol, M);
  auto f = [&](double s) {
    const double value = nonlinearity(std::max(s, 0.0));
    if (value < 0.0 || std::isnan(value)) throw ContractViolation("nonlinearity F must be nonnegative on [0, inf)");
    return value;
  };
  const detail::RadialShooter shooter(ball, M);
  auto g = [&](double v0) { return shooter.shoot(v0, f).end_value; };

  double lo = 1e-8;
  double g_lo = g(lo);
  while (g_lo > 0.0) {
    // Sublinear sources with gamma near 1 reach R even from tiny v0.
    lo *= 1e-4;
    if (lo < 1e-280) throw BracketFailure("shooting map positive at every lower bracket down to 1e-280");
    g_lo = g(lo);
  }
  double hi = 1.0;
  double g_hi = g(hi);
  while (g_hi < 0.0) {
    lo = hi;
    g_lo = g_hi;
    hi *= 2.0;
    if (hi > 1e300) throw BracketFailure("shooting map never changes sign; F may grow too fast");
    g_hi = g(hi);
  }
  if (g_lo == 0.0) hi = lo;

  double root = hi;
  if (g_hi != 0.0 && g_lo != 0.0) {
    std::uintmax_t iters = 300;
    const auto bracket =
        boost::math::tools::toms748_solve(g, lo, hi, g_lo, g_hi, boost::math::tools::eps_tolerance<double>(52), iters);
    // Keep the end of the bracket whose trajectory stays positive inside.
    root = g(bracket.second) >= 0.0 ? bracket.second : bracket.first;
  }

  detail::RadialShooter::Trajectory traj;
  shooter.shoot(root, f, &traj);
  RadialProfile prof = detail::assemble_profile(shooter, ball, std::move(traj), f, std::move(problem), root);
  if (std::abs(prof.residual) > tol * root) {
    throw SolverFailure("shooting residual |v(R)| exceeds tol * v(0)");
  }
  return prof;
}

/// Problem (E'): F(s) = lambda s^gamma with gamma in [0, 1).
inline RadialProfile solve_power_bvp(const Ball& ball, double lambda, double gamma, double tol = 1e-8,
                                     std::size_t M = 4096) {
  if (!(lambda > 0.0)) throw ContractViolation("lambda must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractViolation("gamma must lie in [0, 1]");
  if (gamma == 1.0) {
    throw ContractViolation(
        "gamma = 1 is solvable only for lambda = lambda1(B(R)); use first_eigenpair for that case");
  }
  if (gamma == 0.0) return solve_dirichlet_bvp(ball, [lambda](double) { return lambda; }, tol, M, "E'");
  return solve_dirichlet_bvp(ball, [lambda, gamma](double s) { return lambda * std::pow(s, gamma); }, tol, M, "E'");
}

/// First Dirichlet eigenpair by shooting on lambda with v(0) = 1.
///
/// The first zero z(lambda) of the shot decreases strictly in lambda, so the
/// predicate "v vanishes in (0, R]" is monotone and bisection on it converges
/// to lambda1 from both sides.
inline EigenSolution first_eigenpair(const Ball& ball, double tol = 1e-8, std::size_t M = 4096) {
  detail::check_shooting_inputs(ball, tol, M);
  const detail::RadialShooter shooter(ball, M);
  const double R = ball.radius();
  std::vector<std::pair<double, double>> history;
  auto shot = [&](double lambda) {
    const auto res = shooter.shoot(1.0, [lambda](double s) { return lambda * s; }, nullptr, true);
    return res.first_zero;
  };

  double lo = 1e-6;
  double z = shot(lo);
  history.emplace_back(lo, z);
  if (z <= R) throw BracketFailure("first zero already inside the ball at lambda = 1e-6");
  double hi = 1.0;
  z = shot(hi);
  history.emplace_back(hi, z);
  while (z > R) {
    lo = hi;
    hi *= 2.0;
    if (hi > std::ldexp(1.0, 60)) throw BracketFailure("eigenvalue bracket exceeded 2^60");
    z = shot(hi);
    history.emplace_back(hi, z);
  }
  for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double zm = shot(mid);
    if (hi - lo > 1e-9 * hi) history.emplace_back(mid, zm);
    (zm > R ? lo : hi) = mid;
  }
  const double z_hi = shot(hi);
  if (std::abs(z_hi - R) > tol * R) throw SolverFailure("eigenvalue bisection did not place the first zero at R");

  const double lambda = lo;
  auto f = [lambda](double s) { return lambda * s; };
  detail::RadialShooter::Trajectory traj;
  shooter.shoot(1.0, f, &traj);
  RadialProfile prof = detail::assemble_profile(shooter, ball, std::move(traj), f, "eigen", lambda);

  // Rayleigh quotient by composite Simpson (trapezoid on a trailing odd interval).
  const int N = ball.dimension();
  const std::size_t M_int = prof.intervals();
  auto weight = [&](std::size_t i) {
    return i == 0 ? 0.0 : std::pow(ball.factor()(prof.r[i]).value, N - 1);
  };
  double num = 0.0, den = 0.0;
  const std::size_t simpson_end = M_int - (M_int % 2);
  for (std::size_t i = 0; i <= simpson_end; ++i) {
    const double c = (i == 0 || i == simpson_end) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double w = weight(i);
    num += c * prof.dv[i] * prof.dv[i] * w;
    den += c * prof.v[i] * prof.v[i] * w;
  }
  num *= shooter.step() / 3.0;
  den *= shooter.step() / 3.0;
  if (simpson_end < M_int) {
    const double wa = weight(M_int - 1), wb = weight(M_int);
    num += 0.5 * shooter.step() * (prof.dv[M_int - 1] * prof.dv[M_int - 1] * wa + prof.dv[M_int] * prof.dv[M_int] * wb);
    den += 0.5 * shooter.step() * (prof.v[M_int - 1] * prof.v[M_int - 1] * wa + prof.v[M_int] * prof.v[M_int] * wb);
  }
  return {0.5 * (lo + hi), std::move(prof), num / den, std::move(history)};
}

/// lambda1 of the ball of radius R in the N-dimensional space form of curvature K.
inline double eigenvalue_space_form(double K, double R, int N, double tol = 1e-8, std::size_t M = 4096) {
  if (K > 0.0 && R > convexity_radius_space_form(K) * (1.0 + 1e-12)) {
    throw ContractViolation("space-form eigenvalue requires R <= r_K for K > 0");
  }
  return first_eigenpair(Ball(N, R, WarpedFactor::space_form(K)), tol, M).lambda1;
}

}  // namespace warpconcave

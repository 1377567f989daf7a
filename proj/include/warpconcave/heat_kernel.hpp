#pragma once

// Heat kernels Gamma(rho, t) of the space forms M^N_K, K <= 0, their strict
// log-concavity, and a delta-approximation run of the parabolic solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "warpconcave/concavity_check.hpp"
#include "warpconcave/errors.hpp"
#include "warpconcave/parabolic_radial.hpp"
#include "warpconcave/radial_profile.hpp"
#include "warpconcave/warped_geometry.hpp"

namespace warpconcave {

struct KernelSpec {
  int N;
  double K;
  double t;
};

inline void validate(const KernelSpec& s) {
  if (s.N < 2) throw ContractViolation("kernel dimension must be at least 2");
  if (s.N > 5) throw Unsupported("heat kernels are implemented for N <= 5");
  if (!(s.K <= 0.0)) throw DomainError("heat kernel requires K <= 0", 0.0);
  if (!(s.t > 0.0)) throw DomainError("heat kernel requires t > 0", 0.0);
}

namespace detail {

using std::numbers::pi;

// log of (coth r - 1/r)/sinh r is smooth; below 1e-3 use its series.
inline double coth_minus_inv(double r) {
  if (r < 1e-3) return r / 3.0 - r * r * r / 45.0;
  return 1.0 / std::tanh(r) - 1.0 / r;
}

inline double log_rho_over_sinh(double r) {
  if (r < 1e-4) return -r * r / 6.0;
  // sinh r = e^r (1 - e^{-2r}) / 2
  return std::log(r) - r - std::log1p(-std::exp(-2.0 * r)) + std::log(2.0);
}

inline double log_sinh(double r) { return r + std::log1p(-std::exp(-2.0 * r)) - std::log(2.0); }

inline double log_hyperbolic_3(double rho, double t) {
  return -1.5 * std::log(4.0 * pi * t) + log_rho_over_sinh(rho) - t - rho * rho / (4.0 * t);
}

inline double log_hyperbolic_5(double rho, double t) {
  // Gamma_5 = e^{-3t}/(2 pi sinh rho) * Gamma_3 * (coth rho - 1/rho + rho/(2t))
  double factor;
  if (rho < 1e-3) {
    const double r2 = rho * rho;
    factor = 1.0 / 3.0 - 7.0 * r2 / 90.0 + (1.0 - r2 / 6.0) / (2.0 * t);
  } else {
    factor = (coth_minus_inv(rho) + rho / (2.0 * t)) / std::sinh(rho);
  }
  return -3.0 * t - std::log(2.0 * pi) + std::log(factor) + log_hyperbolic_3(rho, t);
}

// Gamma_2 = sqrt(2) (4 pi t)^{-3/2} e^{-t/4} int_rho^inf s e^{-s^2/4t} / sqrt(cosh s - cosh rho) ds.
// With s = rho + u^2 and cosh s - cosh rho = 2 sinh(rho + u^2/2) sinh(u^2/2)
// the integrand is smooth in u. The factor e^{-rho^2/4t - rho/2} is taken
// outside the integral.
inline double log_hyperbolic_2(double rho, double t) {
  auto g = [rho, t](double u) {
    const double u2 = u * u;
    if (u2 == 0.0) return rho > 0.0 ? 2.0 * rho / std::sqrt(-0.5 * std::expm1(-2.0 * rho)) : 0.0;
    const double s = rho + u2;
    const double a = rho + 0.5 * u2;
    const double decay = std::exp(-(2.0 * rho * u2 + u2 * u2) / (4.0 * t) - 0.25 * u2);
    // sqrt(2 sinh a sinh b) = e^{a/2} sqrt((1 - e^{-2a}) sinh b), with e^{-rho/2} outside
    const double denom = std::sqrt(-std::expm1(-2.0 * a) * std::sinh(0.5 * u2));
    return 2.0 * u * s * decay / denom;
  };
  // Decay exponent reaches 60 by u_max.
  const double q = 240.0 * t;
  const double u2max = -rho - t + std::sqrt((rho + t) * (rho + t) + q);
  const double umax = std::sqrt(std::max(u2max, 1e-12));
  double err = 0.0;
  const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, umax, 15, 1e-13, &err);
  if (!(I > 0.0) || !std::isfinite(I)) throw SolverFailure("heat kernel quadrature failed");
  return 0.5 * std::log(2.0) - 1.5 * std::log(4.0 * pi * t) - 0.25 * t - rho * rho / (4.0 * t) - 0.5 * rho +
         std::log(I);
}

// d/drho log Gamma_2 by central differences with two Richardson levels.
// log Gamma_2 is even in rho, so stencils may cross the pole.
inline double dlog_hyperbolic_2(double rho, double t) {
  const double h = 0.02 * std::min(1.0, std::sqrt(t));
  auto D = [&](double k) {
    return (log_hyperbolic_2(rho + k, t) - log_hyperbolic_2(std::abs(rho - k), t)) / (2.0 * k);
  };
  const double d1 = D(h), d2 = D(h / 2), d3 = D(h / 4);
  const double r1 = (4.0 * d2 - d1) / 3.0, r2 = (4.0 * d3 - d2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

inline double log_hyperbolic_4(double rho, double t) {
  // Gamma_4 = -e^{-2t}/(2 pi sinh rho) * Gamma_2 * (log Gamma_2)'
  // f(rho) = -(log Gamma_2)'/sinh rho is even and positive. Below rho_1 it is
  // interpolated in rho^2 between the limit f(0) = -(log Gamma_2)''(0) and
  // f(rho_1); dividing the difference quotient by sinh rho would amplify
  // quadrature noise there.
  constexpr double rho1 = 1e-2;
  double ratio;
  if (rho < rho1) {
    const double h = 0.02 * std::min(1.0, std::sqrt(t));
    const double l0 = log_hyperbolic_2(0.0, t);
    auto S = [&](double k) { return 2.0 * (log_hyperbolic_2(k, t) - l0) / (k * k); };
    const double s1 = S(h), s2 = S(h / 2), s3 = S(h / 4);
    const double r1 = (4.0 * s2 - s1) / 3.0, r2 = (4.0 * s3 - s2) / 3.0;
    const double f0 = -(16.0 * r2 - r1) / 15.0;
    const double f1 = -dlog_hyperbolic_2(rho1, t) / std::sinh(rho1);
    ratio = f0 + (f1 - f0) * (rho / rho1) * (rho / rho1);
  } else {
    ratio = -dlog_hyperbolic_2(rho, t) / std::sinh(rho);
  }
  if (!(ratio > 0.0)) throw SolverFailure("heat kernel recursion lost positivity");
  return -2.0 * t - std::log(2.0 * pi) + std::log(ratio) + log_hyperbolic_2(rho, t);
}

inline double log_unit_hyperbolic(int N, double rho, double t) {
  switch (N) {
    case 2:
      return log_hyperbolic_2(rho, t);
    case 3:
      return log_hyperbolic_3(rho, t);
    case 4:
      return log_hyperbolic_4(rho, t);
    case 5:
      return log_hyperbolic_5(rho, t);
  }
  throw Unsupported("heat kernels are implemented for N <= 5");
}

}  // namespace detail

/// log Gamma(rho, t) on M^N_K.
inline double kernel_log_value(const KernelSpec& s, double rho) {
  validate(s);
  if (!(rho >= 0.0)) throw ContractViolation("geodesic distance must be nonnegative");
  if (s.K == 0.0) return -0.5 * s.N * std::log(4.0 * std::numbers::pi * s.t) - rho * rho / (4.0 * s.t);
  const double k = -s.K;
  return 0.5 * s.N * std::log(k) + detail::log_unit_hyperbolic(s.N, std::sqrt(k) * rho, k * s.t);
}

/// Gamma(rho, t) on M^N_K; underflows to 0 far in the tail (use kernel_log_value there).
inline double kernel_value(const KernelSpec& s, double rho) { return std::exp(kernel_log_value(s, rho)); }

/// Total mass int_0^{R_cut} Gamma omega_{N-1} sigma_K^{N-1} d rho.
///
/// Throws ContractViolation when the mass density at R_cut, times R_cut, is
/// not below tol (the truncated tail would be visible).
inline double kernel_mass(const KernelSpec& s, double R_cut, double tol = 1e-8) {
  validate(s);
  if (!(R_cut > 0.0)) throw ContractViolation("truncation radius must be positive");
  const double logw = std::log(unit_sphere_area(s.N));
  auto log_density = [&](double r) {
    if (r == 0.0) return -std::numeric_limits<double>::infinity();
    double ls;
    if (s.K == 0.0) {
      ls = std::log(r);
    } else {
      const double k = std::sqrt(-s.K);
      ls = detail::log_sinh(k * r) - std::log(k);
    }
    return logw + (s.N - 1) * ls + kernel_log_value(s, r);
  };
  if (log_density(R_cut) + std::log(R_cut) > std::log(tol * 1e-2)) {
    throw ContractViolation("kernel tail at R_cut exceeds the mass tolerance; enlarge R_cut");
  }
  auto density = [&](double r) { return std::exp(log_density(r)); };
  const int pieces = std::max(8, static_cast<int>(std::ceil(R_cut / std::sqrt(s.t))));
  double mass = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double a = R_cut * i / pieces, b = R_cut * (i + 1) / pieces;
    mass += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(density, a, b, 8, 1e-12);
  }
  return mass;
}

/// Distance from the pole to c(tau), tau in [0,1], on the minimal geodesic
/// from p to q in the totally geodesic 2-plane of M_K through the pole.
inline double space_form_distance_along(double K, const PolarPoint& p, const PolarPoint& q, double tau) {
  if (K == 0.0) {
    const double x = (1 - tau) * p.radius * std::cos(p.angle) + tau * q.radius * std::cos(q.angle);
    const double y = (1 - tau) * p.radius * std::sin(p.angle) + tau * q.radius * std::sin(q.angle);
    return std::hypot(x, y);
  }
  if (K > 0.0) throw Unsupported("space-form geodesics are implemented for K <= 0");
  // Hyperboloid model of curvature -1, after scaling distances by sqrt(-K).
  const double k = std::sqrt(-K);
  const double a = k * p.radius, b = k * q.radius;
  const std::array<double, 3> P{std::cosh(a), std::sinh(a) * std::cos(p.angle), std::sinh(a) * std::sin(p.angle)};
  const std::array<double, 3> Q{std::cosh(b), std::sinh(b) * std::cos(q.angle), std::sinh(b) * std::sin(q.angle)};
  // d = distance(P, Q) via the chord length, accurate for close points.
  const double dx = P[1] - Q[1], dy = P[2] - Q[2], d0 = P[0] - Q[0];
  const double chord2 = dx * dx + dy * dy - d0 * d0;  // Minkowski norm of P - Q = 2(cosh d - 1)
  const double d = 2.0 * std::asinh(0.5 * std::sqrt(std::max(chord2, 0.0)));
  if (d == 0.0) return p.radius;
  const double s0 = std::sinh((1 - tau) * d) / std::sinh(d), s1 = std::sinh(tau * d) / std::sinh(d);
  const double x = s0 * P[1] + s1 * Q[1], y = s0 * P[2] + s1 * Q[2];
  return std::asinh(std::hypot(x, y)) / k;
}

/// Geodesic distance between two points of the polar 2-plane of M_K.
inline double space_form_distance(double K, const PolarPoint& p, const PolarPoint& q) {
  const double dphi = detail::wrap_angle(q.angle - p.angle);
  if (K == 0.0) {
    const double d2 = p.radius * p.radius + q.radius * q.radius - 2.0 * p.radius * q.radius * std::cos(dphi);
    return std::sqrt(std::max(0.0, d2));
  }
  const double k = std::sqrt(-K);
  const double a = k * p.radius, b = k * q.radius;
  // cosh d - 1 = cosh(a-b) - 1 + sinh a sinh b (1 - cos dphi)
  const double half = std::sinh(0.5 * (a - b));
  const double s = std::sin(0.5 * dphi);
  const double c = 2.0 * half * half + 2.0 * std::sinh(a) * std::sinh(b) * s * s;
  return 2.0 * std::asinh(std::sqrt(0.5 * c)) / k;
}

struct KernelConcavityOptions {
  std::size_t radial_points = 512;
  std::size_t n_pairs = 200;
  std::size_t n_params = 9;
  double eps = 1e-10;
  std::uint64_t seed = 0x5eed;
};

/// Strict log-concavity of Gamma(., o, t) on the ball of radius box_radius.
///
/// Radial part: w = log Gamma on a uniform grid, w' < 0 on (h, box] and
/// w'' < -eps on [0, box]. Geodesic part: for sampled endpoint pairs and
/// parameters tau, lhs = log Gamma(c(tau)), rhs = (1-tau) log Gamma(p) +
/// tau log Gamma(q); strict when every gap exceeds eps.
inline ConcavityCertificate kernel_log_concavity(const KernelSpec& s, double box_radius,
                                                 const KernelConcavityOptions& opt = {}) {
  validate(s);
  if (!(box_radius > 0.0)) throw ContractViolation("sample box radius must be positive");
  ConcavityCertificate cert;
  cert.alpha = 0.0;
  cert.method = CertificateMethod::both;
  cert.epsilon = opt.eps;
  cert.boundary_cut = 0.0;

  const std::size_t M = opt.radial_points;
  const double h = box_radius / static_cast<double>(M);
  std::vector<double> w(M + 2);
  for (std::size_t i = 0; i <= M + 1; ++i) w[i] = kernel_log_value(s, h * static_cast<double>(i));
  cert.max_w1 = -std::numeric_limits<double>::infinity();
  cert.max_w2 = -std::numeric_limits<double>::infinity();
  bool radial_ok = true;
  for (std::size_t i = 0; i <= M; ++i) {
    const double wm = i == 0 ? w[1] : w[i - 1];
    const double w2 = (w[i + 1] - 2.0 * w[i] + wm) / (h * h);
    if (w2 > cert.max_w2) cert.max_w2 = w2, cert.max_w2_radius = h * i;
    if (i >= 1) {
      const double w1 = (w[i + 1] - wm) / (2.0 * h);
      if (i >= 2 && w1 > cert.max_w1) cert.max_w1 = w1, cert.max_w1_radius = h * i;
      if (i >= 2 && !(w1 < 0.0)) radial_ok = false;
    }
  }
  if (!(cert.max_w2 < -opt.eps)) radial_ok = false;

  cert.min_gap = std::numeric_limits<double>::infinity();
  bool geodesic_ok = true;
  for (const auto& [p, q] : sample_endpoint_pairs(box_radius, opt.n_pairs, opt.seed)) {
    const double lp = kernel_log_value(s, p.radius), lq = kernel_log_value(s, q.radius);
    for (std::size_t k = 1; k <= opt.n_params; ++k) {
      const double tau = static_cast<double>(k) / static_cast<double>(opt.n_params + 1);
      const double lhs = kernel_log_value(s, space_form_distance_along(s.K, p, q, tau));
      const double rhs = (1.0 - tau) * lp + tau * lq;
      const double gap = lhs - rhs;
      cert.geodesic_results.push_back({p, q, tau, lhs, rhs, gap});
      cert.min_gap = std::min(cert.min_gap, gap);
      if (!(gap > opt.eps)) geodesic_ok = false;
    }
  }
  cert.verdict = radial_ok && geodesic_ok ? Verdict::certified_strict : Verdict::violated;
  return cert;
}

struct DeltaApproximationOptions {
  double ball_radius = 8.0;
  double support = 0.05;
  std::size_t M = 4000;
  double dt0 = 1e-6;
  double dt_growth = 1.02;
  double dt_max = 2e-3;
};

/// Heat flow of a narrow normalized bump at the pole of the curvature-K
/// ball, sampled at the given times. The bump is a Gaussian of width
/// support/5 truncated at the support radius, normalized to unit mass in
/// the solver's finite-volume measure.
inline std::vector<EvolutionState> delta_approximation(int N, double K, const std::vector<double>& times,
                                                       const DeltaApproximationOptions& opt = {}) {
  validate({N, K, 1.0});
  const Ball ball(N, opt.ball_radius, WarpedFactor::space_form(K));
  const auto r = uniform_grid(opt.ball_radius, opt.M);
  const double width = opt.support / 5.0;
  std::vector<double> v(r.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < opt.support) v[i] = std::exp(-0.5 * r[i] * r[i] / (width * width));
  }
  const double mass = discrete_mass(ball, profile_from_values(r, v, "bump"));
  for (double& x : v) x /= mass;
  const auto initial = profile_from_values(r, v, "bump");
  EvolveOptions eo;
  eo.dt_growth = opt.dt_growth;
  eo.dt_max = opt.dt_max;
  const double t_end = *std::max_element(times.begin(), times.end());
  return evolve_adaptive(ball, Nonlinearity::heat(), initial, t_end, opt.dt0, times, eo);
}

}  // namespace warpconcave

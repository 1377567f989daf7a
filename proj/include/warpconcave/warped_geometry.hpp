#pragma once

// Rotationally symmetric balls as warped products dr^2 + sigma(r)^2 g_S.
//
// A ball is described by its dimension N, radius R and the conformal polar
// factor sigma. Curvature, the hypotheses on log sigma used by the concavity
// results, and geodesics of the 2-D section through the centre all derive
// from sigma and its first three derivatives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warpconcave/errors.hpp"
#include "warpconcave/quintic_spline.hpp"

namespace warpconcave {

/// sigma and its first three derivatives at one radius.
struct FactorJet {
  double value;
  double d1;
  double d2;
  double d3;
};

/// The warping function sigma of a rotationally symmetric ball.
class WarpedFactor {
 public:
  enum class Kind { space_form, cubic_perturbed, tabulated };

  /// sigma_K: sin(sqrt(K) r)/sqrt(K), r, or sinh(sqrt(-K) r)/sqrt(-K).
  static WarpedFactor space_form(double K) {
    if (!std::isfinite(K)) throw ContractViolation("space-form curvature must be finite");
    WarpedFactor f(Kind::space_form);
    f.param_ = K;
    return f;
  }

  /// sigma(r) = r + c r^3.
  static WarpedFactor cubic_perturbed(double c) {
    if (!std::isfinite(c)) throw ContractViolation("cubic coefficient must be finite");
    WarpedFactor f(Kind::cubic_perturbed);
    f.param_ = c;
    return f;
  }

  /// Quintic-spline interpolant through (nodes, values).
  ///
  /// The table must start at the pole: nodes[0] == 0 and values[0] == 0,
  /// with strictly positive values elsewhere.
  static WarpedFactor tabulated(std::vector<double> nodes, std::vector<double> values) {
    if (nodes.empty() || nodes.front() != 0.0 || values.empty() || values.front() != 0.0) {
      throw ContractViolation("tabulated factor must start with sigma(0) = 0");
    }
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (!(values[i] > 0.0)) throw ContractViolation("tabulated sigma must be positive off the pole");
    }
    WarpedFactor f(Kind::tabulated);
    f.spline_ = std::make_shared<const QuinticSpline>(nodes, values);
    f.nodes_ = std::make_shared<const std::vector<double>>(std::move(nodes));
    f.values_ = std::make_shared<const std::vector<double>>(std::move(values));
    return f;
  }

  Kind kind() const noexcept { return kind_; }

  /// Curvature K of a space form, or the coefficient c of a cubic factor.
  double parameter() const noexcept { return param_; }

  const std::vector<double>& table_nodes() const { return *nodes_; }
  const std::vector<double>& table_values() const { return *values_; }

  /// Supremum of radii where sigma is defined and positive.
  double max_radius() const {
    switch (kind_) {
      case Kind::space_form:
        return param_ > 0.0 ? std::numbers::pi / std::sqrt(param_)
                            : std::numeric_limits<double>::infinity();
      case Kind::cubic_perturbed:
        return param_ < 0.0 ? 1.0 / std::sqrt(-param_) : std::numeric_limits<double>::infinity();
      case Kind::tabulated:
        return spline_->upper();
    }
    return 0.0;
  }

  FactorJet operator()(double r) const {
    switch (kind_) {
      case Kind::space_form: {
        const double K = param_;
        if (K > 0.0) {
          const double k = std::sqrt(K);
          const double s = std::sin(k * r), c = std::cos(k * r);
          return {s / k, c, -k * s, -K * c};
        }
        if (K < 0.0) {
          const double k = std::sqrt(-K);
          const double s = std::sinh(k * r), c = std::cosh(k * r);
          return {s / k, c, k * s, -K * c};
        }
        return {r, 1.0, 0.0, 0.0};
      }
      case Kind::cubic_perturbed: {
        const double c = param_;
        return {r + c * r * r * r, 1.0 + 3.0 * c * r * r, 6.0 * c * r, 6.0 * c};
      }
      case Kind::tabulated: {
        const auto d = spline_->derivatives(r);
        return {d[0], d[1], d[2], d[3]};
      }
    }
    return {};
  }

  /// lim_{r->0} sigma'''(r); equals minus the curvature at the pole.
  double pole_third_derivative() const {
    switch (kind_) {
      case Kind::space_form:
        return -param_;
      case Kind::cubic_perturbed:
        return 6.0 * param_;
      case Kind::tabulated:
        return spline_->derivatives(0.0)[3];
    }
    return 0.0;
  }

 private:
  explicit WarpedFactor(Kind k) : kind_(k) {}

  Kind kind_;
  double param_ = 0.0;
  std::shared_ptr<const QuinticSpline> spline_;
  std::shared_ptr<const std::vector<double>> nodes_;
  std::shared_ptr<const std::vector<double>> values_;
};

/// pi/(2 sqrt K) for K > 0, +inf otherwise.
inline double convexity_radius_space_form(double K) {
  if (K > 0.0) return std::numbers::pi / (2.0 * std::sqrt(K));
  return std::numeric_limits<double>::infinity();
}

/// Metric ball B(R) of dimension N with warping factor sigma.
class Ball {
 public:
  Ball(int dimension, double radius, WarpedFactor factor)
      : dimension_(dimension), radius_(radius), factor_(std::move(factor)) {
    if (dimension_ < 2) throw ContractViolation("ball dimension must be at least 2");
    if (!(radius_ > 0.0) || !std::isfinite(radius_)) throw ContractViolation("ball radius must be positive");
    if (radius_ > factor_.max_radius()) {
      throw ContractViolation("ball radius exceeds the domain of the warping factor");
    }
    if (factor_.kind() == WarpedFactor::Kind::space_form && factor_.parameter() > 0.0 &&
        radius_ > convexity_radius_space_form(factor_.parameter()) * (1.0 + 1e-12)) {
      throw ContractViolation("positive-curvature ball radius exceeds the convexity radius");
    }
  }

  int dimension() const noexcept { return dimension_; }
  double radius() const noexcept { return radius_; }
  const WarpedFactor& factor() const noexcept { return factor_; }

  /// Inner cutoff used by grid checks, R/(10 * grid_size).
  double inner_cutoff(std::size_t grid_size) const {
    return radius_ / (10.0 * static_cast<double>(grid_size));
  }

 private:
  int dimension_;
  double radius_;
  WarpedFactor factor_;
};

/// ((log sigma)', (log sigma)'', (log sigma)''').
struct LogSigmaDerivs {
  double d1;
  double d2;
  double d3;
};

inline LogSigmaDerivs log_sigma_derivs(const WarpedFactor& factor, double r) {
  if (!(r > 0.0) || r > factor.max_radius()) {
    throw DomainError("log sigma derivatives requested outside (0, max radius]");
  }
  const FactorJet j = factor(r);
  const double s = j.value;
  return {j.d1 / s, (s * j.d2 - j.d1 * j.d1) / (s * s),
          (2.0 * j.d1 * j.d1 * j.d1 - 3.0 * s * j.d1 * j.d2 + s * s * j.d3) / (s * s * s)};
}

inline LogSigmaDerivs log_sigma_derivs(const Ball& ball, double r) {
  if (r > ball.radius() * (1.0 + 1e-14)) throw DomainError("radius outside the ball");
  return log_sigma_derivs(ball.factor(), r);
}

/// Sectional curvature -sigma''/sigma of planes containing the radial direction.
inline double radial_sectional_curvature(const WarpedFactor& factor, double r) {
  if (!(r > 0.0) || r > factor.max_radius()) {
    throw DomainError("curvature requested outside (0, max radius]");
  }
  const FactorJet j = factor(r);
  return -j.d2 / j.value;
}

// --------------------------------------------------------------------------
// Hypothesis checks
// --------------------------------------------------------------------------

enum class ConditionId {
  c2_necessary,  ///< sigma' > 0
  eq11,          ///< (log sigma)'' <= 0, strict for alpha in {0, 1}
  eq12,          ///< (log sigma)'' <= -alpha lambda1 / (N - 1)
  eq13,          ///< (log sigma)'' < 0 and (log sigma)''' >= 0
};

inline std::string to_string(ConditionId id) {
  switch (id) {
    case ConditionId::c2_necessary:
      return "C2-necessary";
    case ConditionId::eq11:
      return "Eq11";
    case ConditionId::eq12:
      return "Eq12";
    case ConditionId::eq13:
      return "Eq13";
  }
  return "?";
}

/// Grid verdict for one hypothesis.
///
/// Every condition is written as "lhs < rhs" (or "<="); worst_margin is the
/// largest lhs - rhs over the grid, so a negative margin means the condition
/// holds. For eq13 the margin is max (log sigma)'' unless the third
/// derivative goes negative somewhere, in which case it is -min (log sigma)'''.
struct ConditionReport {
  ConditionId id;
  bool holds;
  double worst_margin;
  double worst_radius;
};

/// Uniform verification grid over (delta0, R], delta0 = R/(10 n).
inline std::vector<double> condition_grid(const Ball& ball, std::size_t grid_size) {
  if (grid_size < 2) throw ContractViolation("condition grid needs at least two points");
  const double lo = ball.inner_cutoff(grid_size);
  const double hi = ball.radius();
  std::vector<double> r(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    r[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_size - 1);
  }
  r.back() = hi;
  return r;
}

inline ConditionReport check_condition(const Ball& ball, ConditionId which,
                                       std::optional<double> alpha = std::nullopt,
                                       std::optional<double> lambda1 = std::nullopt,
                                       std::size_t grid_size = 2048) {
  bool strict = true;
  double shift = 0.0;
  switch (which) {
    case ConditionId::eq11:
      if (!alpha) throw ContractViolation("Eq11 check requires alpha");
      if (!(*alpha >= 0.0 && *alpha <= 1.0)) throw ContractViolation("Eq11 alpha must lie in [0, 1]");
      strict = (*alpha == 0.0 || *alpha == 1.0);
      break;
    case ConditionId::eq12:
      if (!alpha || !lambda1) throw ContractViolation("Eq12 check requires alpha and lambda1");
      if (!(*alpha > 0.0 && *alpha < 1.0)) throw ContractViolation("Eq12 alpha must lie in (0, 1)");
      if (!(*lambda1 > 0.0)) throw ContractViolation("Eq12 lambda1 must be positive");
      strict = false;
      shift = *alpha * *lambda1 / (ball.dimension() - 1);
      break;
    default:
      break;
  }

  const auto grid = condition_grid(ball, grid_size);
  double worst = -std::numeric_limits<double>::infinity();
  double worst_r = grid.front();
  double third_min = std::numeric_limits<double>::infinity();
  double third_r = grid.front();
  for (double r : grid) {
    double value = 0.0;
    if (which == ConditionId::c2_necessary) {
      value = -ball.factor()(r).d1;
    } else {
      const auto d = log_sigma_derivs(ball.factor(), r);
      value = d.d2 + shift;
      if (which == ConditionId::eq13 && d.d3 < third_min) {
        third_min = d.d3;
        third_r = r;
      }
    }
    if (value > worst) {
      worst = value;
      worst_r = r;
    }
  }

  if (which == ConditionId::eq13 && third_min < 0.0) {
    return {which, false, -third_min, third_r};
  }
  const bool holds = strict ? worst < 0.0 : worst <= 0.0;
  return {which, holds, worst, worst_r};
}

// --------------------------------------------------------------------------
// Geodesics of the 2-D section
// --------------------------------------------------------------------------

/// A point of the 2-D section in geodesic polar coordinates.
struct PolarPoint {
  double radius;
  double angle;
};

/// Coordinate velocity (dr/dt, dphi/dt).
struct PolarVelocity {
  double radial;
  double angular;
};

struct GeodesicSample {
  double t;
  double radius;
  double angle;
  double radial_rate;
  double angular_rate;
};

/// Geodesic c : [0,1] -> B(R) sampled on a uniform parameter grid.
struct Geodesic {
  std::vector<GeodesicSample> samples;
  double length = 0.0;
  double clairaut = 0.0;  ///< sigma(a)^2 phi' at t = 0
  bool truncated = false;
  double exit_parameter = 1.0;
  bool through_pole = false;
  double pole_parameter = -1.0;  ///< t0 with c(t0) = o when through_pole

  PolarPoint start() const { return {samples.front().radius, samples.front().angle}; }
  PolarPoint end() const { return {samples.back().radius, samples.back().angle}; }

  /// Distance from the centre at parameter t, by cubic Hermite interpolation.
  double radius_at(double t) const {
    if (samples.size() < 2) return samples.front().radius;
    const double t_end = samples.back().t;
    t = std::clamp(t, 0.0, t_end);
    const double h = samples[1].t - samples[0].t;
    std::size_t k = static_cast<std::size_t>(t / h);
    if (k >= samples.size() - 1) k = samples.size() - 2;
    const auto& s0 = samples[k];
    const auto& s1 = samples[k + 1];
    if (through_pole) {
      // Radial curves: |s(t)| is piecewise linear, evaluate exactly.
      return std::abs(signed_offset_ + signed_rate_ * t);
    }
    const double x = (t - s0.t) / h;
    const double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
    const double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
    return h00 * s0.radius + h10 * h * s0.radial_rate + h01 * s1.radius + h11 * h * s1.radial_rate;
  }

  /// max_i |E_i - E_0| / E_0 with E = (a')^2 + sigma(a)^2 (phi')^2.
  double energy_drift(const WarpedFactor& factor) const {
    auto energy = [&](const GeodesicSample& s) {
      const double sig = s.radius > 0.0 ? factor(s.radius).value : 0.0;
      return s.radial_rate * s.radial_rate + sig * sig * s.angular_rate * s.angular_rate;
    };
    const double e0 = energy(samples.front());
    double drift = 0.0;
    for (const auto& s : samples) drift = std::max(drift, std::abs(energy(s) - e0));
    return e0 > 0.0 ? drift / e0 : drift;
  }

  /// max_i |c_i - c_0| / |c_0| for the Clairaut integral c = sigma(a)^2 phi'.
  double clairaut_drift(const WarpedFactor& factor) const {
    double drift = 0.0;
    for (const auto& s : samples) {
      const double sig = s.radius > 0.0 ? factor(s.radius).value : 0.0;
      drift = std::max(drift, std::abs(sig * sig * s.angular_rate - clairaut));
    }
    return clairaut != 0.0 ? drift / std::abs(clairaut) : drift;
  }

  // Radial representation s(t) = offset + rate t (radius = |s|).
  double signed_offset_ = 0.0;
  double signed_rate_ = 0.0;
};

namespace detail {

inline double wrap_angle(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  phi = std::fmod(phi, two_pi);
  if (phi <= -std::numbers::pi) phi += two_pi;
  if (phi > std::numbers::pi) phi -= two_pi;
  return phi;
}

struct GeoState {
  double a, phi, da, dphi;
};

inline GeoState geo_rhs(const WarpedFactor& f, const GeoState& y) {
  const FactorJet j = f(y.a);
  return {y.da, y.dphi, y.dphi * y.dphi * j.value * j.d1, -2.0 * (j.d1 / j.value) * y.da * y.dphi};
}

inline GeoState axpy(const GeoState& y, double h, const GeoState& k) {
  return {y.a + h * k.a, y.phi + h * k.phi, y.da + h * k.da, y.dphi + h * k.dphi};
}

inline GeoState rk4(const WarpedFactor& f, const GeoState& y, double h) {
  const GeoState k1 = geo_rhs(f, y);
  const GeoState k2 = geo_rhs(f, axpy(y, 0.5 * h, k1));
  const GeoState k3 = geo_rhs(f, axpy(y, 0.5 * h, k2));
  const GeoState k4 = geo_rhs(f, axpy(y, h, k3));
  return {y.a + h / 6.0 * (k1.a + 2 * k2.a + 2 * k3.a + k4.a),
          y.phi + h / 6.0 * (k1.phi + 2 * k2.phi + 2 * k3.phi + k4.phi),
          y.da + h / 6.0 * (k1.da + 2 * k2.da + 2 * k3.da + k4.da),
          y.dphi + h / 6.0 * (k1.dphi + 2 * k2.dphi + 2 * k3.dphi + k4.dphi)};
}

// One macro step of length h, subdivided near the pole so that each
// sub-step turns by at most 0.005 rad and moves by at most 1% of the radius.
// The subdivision is recomputed after every sub-step, since a step that
// starts away from the pole may pass close to it.
inline GeoState geo_step(const WarpedFactor& f, const GeoState& y, double h, double speed) {
  GeoState out = y;
  double left = h;
  for (int i = 0; i < 1000000 && left > 0.0; ++i) {
    const double turn = std::abs(out.dphi) * left / 0.005;
    const double radial = out.a > 0.0 ? speed * left / (0.01 * out.a) : 1.0;
    const double n = std::ceil(std::max({1.0, turn, radial}));
    const double hs = n == 1.0 ? left : left / n;
    out = rk4(f, out, hs);
    left = n == 1.0 ? 0.0 : left - hs;
  }
  return out;
}

inline Geodesic radial_geodesic(double r0, double angle, double rate, std::size_t steps) {
  // s(t) = r0 + rate t, radius |s|; crossing zero flips the ray by pi.
  Geodesic g;
  g.length = std::abs(rate);
  g.clairaut = 0.0;
  g.signed_offset_ = r0;
  g.signed_rate_ = rate;
  g.samples.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(steps);
    const double s = r0 + rate * t;
    const double phi = s >= 0.0 ? angle : wrap_angle(angle + std::numbers::pi);
    const double da = s >= 0.0 ? rate : -rate;
    g.samples.push_back({t, std::abs(s), phi, da, 0.0});
  }
  if (rate < 0.0 && r0 + rate < 0.0) {
    g.through_pole = true;
    g.pole_parameter = r0 / -rate;
  }
  return g;
}

}  // namespace detail

/// Integrates the geodesic equations of the 2-D section,
///   a'' = (phi')^2 sigma(a) sigma'(a),  phi'' = -2 (sigma'/sigma) a' phi',
/// by classical RK4 from `start` with initial direction `dir` rescaled to
/// speed `length`, so that t in [0, 1] covers an arc of that length.
///
/// Launches from the pole (radius < 1e-8 R) are radial along `start.angle`.
/// Curves whose closest approach to the pole is below 1e-8 R are treated as
/// exactly radial as well; phi is undefined at the pole.
inline Geodesic integrate_geodesic(const Ball& ball, PolarPoint start, PolarVelocity dir, double length,
                                   std::size_t steps = 4096) {
  const double R = ball.radius();
  const auto& f = ball.factor();
  if (!(start.radius >= 0.0 && start.radius < R)) throw ContractViolation("geodesic start must lie in [0, R)");
  if (!(length > 0.0)) throw ContractViolation("geodesic length must be positive");
  if (steps < 1) throw ContractViolation("geodesic needs at least one step");

  const double pole_tol = 1e-8 * R;
  Geodesic g;
  if (start.radius < pole_tol) {
    g = detail::radial_geodesic(0.0, start.angle, length, steps);
  } else {
    const double sig0 = f(start.radius).value;
    const double speed = std::hypot(dir.radial, sig0 * dir.angular);
    if (!(speed > 0.0)) throw ContractViolation("geodesic direction must be nonzero");
    const double scale = length / speed;
    const double da0 = dir.radial * scale;
    const double dphi0 = dir.angular * scale;
    const double clairaut = sig0 * sig0 * dphi0;
    if (std::abs(clairaut) / length < pole_tol) {
      g = detail::radial_geodesic(start.radius, start.angle, da0 >= 0.0 ? length : -length, steps);
    } else {
      g.length = length;
      g.clairaut = clairaut;
      g.samples.reserve(steps + 1);
      const double h = 1.0 / static_cast<double>(steps);
      detail::GeoState y{start.radius, start.angle, da0, dphi0};
      g.samples.push_back({0.0, y.a, detail::wrap_angle(y.phi), y.da, y.dphi});
      for (std::size_t k = 1; k <= steps; ++k) {
        const detail::GeoState next = detail::geo_step(f, y, h, length);
        const double t = static_cast<double>(k) * h;
        if (next.a >= R) {
          g.truncated = true;
          g.exit_parameter = t - h + h * (R - y.a) / (next.a - y.a);
          break;
        }
        y = next;
        g.samples.push_back({t, y.a, detail::wrap_angle(y.phi), y.da, y.dphi});
      }
    }
  }
  if (!g.truncated) {
    for (const auto& s : g.samples) {
      if (s.radius >= R) {
        g.truncated = true;
        g.exit_parameter = s.t;
        break;
      }
    }
  }
  return g;
}

/// Minimal geodesic between two points of the ball, by shooting on the
/// launch angle. The launch direction is swept over (0, pi) relative to the
/// inward radial direction in 64 coarse probes, the first sign change of
/// (crossing radius on the target ray) - (target radius) is bracketed, and
/// the bracket is refined by Illinois regula falsi. The result is
/// re-integrated with `steps` fixed RK4 steps over its exact length.
inline Geodesic connect_geodesic(const Ball& ball, PolarPoint p, PolarPoint q, double tol = 1e-10,
                                 std::size_t steps = 4096) {
  const double R = ball.radius();
  const auto& f = ball.factor();
  if (!(p.radius >= 0.0 && p.radius < R && q.radius >= 0.0 && q.radius < R)) {
    throw ContractViolation("connect_geodesic endpoints must lie in the ball");
  }
  const double pole_tol = 1e-8 * R;
  const double delta = detail::wrap_angle(q.angle - p.angle);
  const double sweep = std::abs(delta);
  const double orient = delta >= 0.0 ? 1.0 : -1.0;
  const bool p_pole = p.radius < pole_tol;
  const bool q_pole = q.radius < pole_tol;

  if (p_pole && q_pole) throw ContractViolation("connect_geodesic endpoints coincide");
  if (p_pole) return integrate_geodesic(ball, {0.0, q.angle}, {1.0, 0.0}, q.radius, steps);
  if (q_pole) return detail::radial_geodesic(p.radius, p.angle, -p.radius, steps);
  if (sweep < 1e-13) {
    if (std::abs(q.radius - p.radius) < 1e-300) throw ContractViolation("connect_geodesic endpoints coincide");
    return detail::radial_geodesic(p.radius, p.angle, q.radius - p.radius, steps);
  }
  if (std::numbers::pi - sweep < 1e-13) {
    return detail::radial_geodesic(p.radius, p.angle, -(p.radius + q.radius), steps);
  }

  const double sig_p = f(p.radius).value;
  const double h_fine = 2.0 * R / static_cast<double>(steps);
  const double length_cap = 4.0 * R;

  struct Shot {
    double miss;  // crossing radius minus target radius, +inf if the ray is never reached
    double length;
  };

  // Unit-speed integration until the angular progress reaches `sweep`. The
  // launch is parametrized by its deviation u from the inward radial
  // direction, which keeps full relative precision for near-pole passages.
  auto shoot = [&](double u, double h) -> Shot {
    detail::GeoState y{p.radius, 0.0, -std::cos(u), std::sin(u) / sig_p};
    double s = 0.0;
    while (s < length_cap) {
      const detail::GeoState next = detail::geo_step(f, y, h, 1.0);
      // A step may cross the target ray inside the ball and leave it afterwards.
      if (next.phi >= sweep) {
        // Solve for the partial step landing exactly on the target ray.
        double h_lo = 0.0, p_lo = y.phi;
        double h_hi = h, p_hi = next.phi;
        detail::GeoState land = next;
        double h_land = h;
        for (int it = 0; it < 8 && p_hi > p_lo; ++it) {
          h_land = h_lo + (h_hi - h_lo) * (sweep - p_lo) / (p_hi - p_lo);
          land = detail::geo_step(f, y, h_land, 1.0);
          if (std::abs(land.phi - sweep) < 1e-15) break;
          if (land.phi < sweep) {
            h_lo = h_land;
            p_lo = land.phi;
          } else {
            h_hi = h_land;
            p_hi = land.phi;
          }
        }
        if (land.a >= R) return {std::numeric_limits<double>::infinity(), s};
        return {land.a - q.radius, s + h_land};
      }
      if (next.a >= R) return {std::numeric_limits<double>::infinity(), s};
      y = next;
      s += h;
    }
    return {std::numeric_limits<double>::infinity(), s};
  };

  // Coarse sweep: the miss increases from -r_q (u -> 0, passes through the
  // pole) to +inf (u -> pi, escapes).
  constexpr int kProbes = 64;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double probe = std::numbers::pi / (kProbes + 1);
  const double h_coarse = 8.0 * h_fine;
  double neg = 0.0, pos = std::numbers::pi;
  double miss_neg = -q.radius, miss_pos = kInf;
  for (int k = kProbes; k >= 1; --k) {
    const double u = probe * k;
    if (shoot(u, h_coarse).miss <= 0.0) {
      neg = u;
      break;
    }
    pos = u;
  }
  // Re-evaluate the bracket ends at full resolution.
  if (neg > 0.0) miss_neg = shoot(neg, h_fine).miss;
  if (pos < std::numbers::pi) miss_pos = shoot(pos, h_fine).miss;
  // Coarse and fine integrations can disagree right at the sign change.
  while (miss_pos <= 0.0 && pos < std::numbers::pi) {
    neg = pos;
    miss_neg = miss_pos;
    pos = std::min(std::numbers::pi, pos + probe);
    miss_pos = pos < std::numbers::pi ? shoot(pos, h_fine).miss : kInf;
  }
  while (miss_neg > 0.0 && neg > 0.0) {
    pos = neg;
    miss_pos = miss_neg;
    neg = std::max(0.0, neg - probe);
    miss_neg = neg > 0.0 ? shoot(neg, h_fine).miss : -q.radius;
  }

  Shot best{kInf, 0.0};
  double best_u = 0.5 * (neg + pos);
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    double u;
    if (std::isfinite(miss_pos)) {
      u = neg + (pos - neg) * miss_neg / (miss_neg - miss_pos);
      if (!(u > neg && u < pos)) u = 0.5 * (neg + pos);
    } else {
      u = 0.5 * (neg + pos);
    }
    const Shot s = shoot(u, h_fine);
    if (std::abs(s.miss) < std::abs(best.miss)) {
      best = s;
      best_u = u;
    }
    if (std::abs(s.miss) <= tol) break;
    if (pos - neg <= 4.0 * std::numeric_limits<double>::epsilon() * pos) break;
    if (s.miss > 0.0) {
      pos = u;
      miss_pos = s.miss;
      if (side == 1 && std::isfinite(miss_pos)) miss_neg *= 0.5;
      side = 1;
    } else {
      neg = u;
      miss_neg = s.miss;
      if (side == -1 && std::isfinite(miss_pos)) miss_pos *= 0.5;
      side = -1;
    }
  }
  // Shots whose miss is ill-conditioned in u can exhaust double precision
  // before reaching `tol`; the endpoint check below still bounds the result.
  const double accept = std::max(10.0 * tol, 1e-9 * R);
  if (!(std::abs(best.miss) <= accept)) {
    throw SolverFailure("connect_geodesic did not converge; geometry may violate strong convexity");
  }

  Geodesic g = integrate_geodesic(ball, p, {-std::cos(best_u), orient * std::sin(best_u) / sig_p}, best.length,
                                  steps);
  const auto e = g.end();
  const double dphi = detail::wrap_angle(e.angle - q.angle);
  const double sig_q = f(q.radius).value;
  const double miss = std::hypot(e.radius - q.radius, sig_q * dphi);
  if (g.truncated || miss > accept) {
    throw SolverFailure("connect_geodesic endpoint mismatch after re-integration");
  }
  return g;
}

}  // namespace warpconcave

#pragma once

// The eigenfunction concavity threshold A(sigma, R, N), radial curvature
// bounds, Cheng's eigenvalue comparison and the small-ball threshold.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "warpconcave/bessel.hpp"
#include "warpconcave/elliptic_radial.hpp"
#include "warpconcave/errors.hpp"
#include "warpconcave/warped_geometry.hpp"

namespace warpconcave {

struct CurvatureBounds {
  double K_min;
  double K_max;
  double K_min_radius;
  double K_max_radius;
};

/// Extrema of -sigma''/sigma over the closed ball.
///
/// The grid is the condition grid on [R/(10 n), R]; the value at the pole is
/// the limit -sigma'''(0), taken from the factor's Taylor data.
inline CurvatureBounds curvature_bounds(const Ball& ball, std::size_t grid_size = 2048) {
  const double K0 = -ball.factor().pole_third_derivative();
  CurvatureBounds b{K0, K0, 0.0, 0.0};
  for (double r : condition_grid(ball, grid_size)) {
    const double K = radial_sectional_curvature(ball.factor(), r);
    if (K < b.K_min) b.K_min = K, b.K_min_radius = r;
    if (K > b.K_max) b.K_max = K, b.K_max_radius = r;
  }
  return b;
}

struct ThresholdReport {
  double A;                 ///< (N-1)/lambda1 * inf(-(log sigma)''); <= 0 means no admissible alpha
  double lambda1_used;
  double inf_point;         ///< radius attaining the infimum
  CurvatureBounds curvature;
  std::optional<bool> cheng_ok;  ///< empty when the comparison radius exceeds r_{K_max}
  double lambda1_model = std::numeric_limits<double>::quiet_NaN();  ///< lambda1(K_max, R, N)
  /// (N-1)/lambda1(K_max,R,N) (K_max - K_min + 1/sigma(R)^2), an upper bound for A.
  double curvature_estimate = std::numeric_limits<double>::quiet_NaN();

  bool admissible() const { return A > 0.0; }
};

/// Threshold A(sigma, R, N) = (N-1)/lambda1 inf_{0<r<R} (-(log sigma)'') on
/// the condition grid, with curvature bounds and the Cheng comparison.
inline ThresholdReport alpha_threshold(const Ball& ball, double lambda1, std::size_t grid_size = 2048,
                                       double cheng_tol = 1e-8) {
  if (!(lambda1 > 0.0)) throw ContractViolation("lambda1 must be positive");
  const int N = ball.dimension();
  double inf = std::numeric_limits<double>::infinity();
  double at = 0.0;
  for (double r : condition_grid(ball, grid_size)) {
    const double value = -log_sigma_derivs(ball.factor(), r).d2;
    if (value < inf) inf = value, at = r;
  }
  ThresholdReport rep{(N - 1) / lambda1 * inf, lambda1, at, curvature_bounds(ball, grid_size), std::nullopt};
  const double K_max = rep.curvature.K_max;
  if (K_max <= 0.0 || ball.radius() <= convexity_radius_space_form(K_max)) {
    rep.lambda1_model = eigenvalue_space_form(K_max, ball.radius(), N);
    rep.cheng_ok = lambda1 >= rep.lambda1_model * (1.0 - cheng_tol);
    const double sR = ball.factor()(ball.radius()).value;
    rep.curvature_estimate = (N - 1) / rep.lambda1_model * (K_max - rep.curvature.K_min + 1.0 / (sR * sR));
  }
  return rep;
}

struct ChengReport {
  bool holds;
  double lambda_ball;   ///< lambda1(B(R))
  double lambda_model;  ///< lambda1(K_max(R), R, N)
  double K_max;
  double relative_gap;  ///< (lambda_ball - lambda_model)/lambda_model
};

/// Cheng's comparison lambda1(B(R)) >= lambda1(K_max(R), R, N), within tol relative.
inline ChengReport cheng_check(const Ball& ball, double tol = 1e-8, std::size_t M = 4096) {
  const auto bounds = curvature_bounds(ball);
  if (bounds.K_max > 0.0 && ball.radius() > convexity_radius_space_form(bounds.K_max)) {
    throw Unsupported("comparison ball exceeds the convexity radius of curvature K_max");
  }
  const double lb = first_eigenpair(ball, tol, M).lambda1;
  const double lm = eigenvalue_space_form(bounds.K_max, ball.radius(), ball.dimension(), tol, M);
  const double gap = (lb - lm) / lm;
  return {gap >= -tol, lb, lm, bounds.K_max, gap};
}

/// Limit of A(sigma, R, N) as R -> 0: (N-1)/j_{(N-2)/2}^2.
inline double small_ball_threshold(int N) {
  if (N < 2) throw ContractViolation("dimension must be at least 2");
  const double j = bessel_first_zero((N - 2) / 2.0);
  return (N - 1) / (j * j);
}

}  // namespace warpconcave

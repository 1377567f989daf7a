#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "warpconcave/errors.hpp"

namespace warpconcave {

/// Grid function v(r) on the uniform grid r_i = i R / M, i = 0..M.
///
/// dv and d2v hold v' and v''. Shooting solvers fill them from the ODE;
/// time-stepping solvers use second-order finite differences.
struct RadialProfile {
  std::vector<double> r;
  std::vector<double> v;
  std::vector<double> dv;
  std::vector<double> d2v;
  std::string problem;
  double residual = 0.0;            ///< v(R) before the boundary value was pinned
  double shooting_parameter = 0.0;  ///< v(0) for (E), lambda for the eigenproblem

  std::size_t intervals() const { return r.size() - 1; }
  double radius() const { return r.back(); }
  double step() const { return r[1] - r[0]; }
  double max_value() const { return *std::max_element(v.begin(), v.end()); }

  /// v at an arbitrary radius in [0, R] by cubic Hermite interpolation.
  double value_at(double rho) const {
    const double h = step();
    rho = std::clamp(rho, 0.0, radius());
    std::size_t k = static_cast<std::size_t>(rho / h);
    if (k >= intervals()) k = intervals() - 1;
    const double x = (rho - r[k]) / h;
    const double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
    const double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
    return h00 * v[k] + h10 * h * dv[k] + h01 * v[k + 1] + h11 * h * dv[k + 1];
  }

  /// Bound on the Hermite interpolation error, h^4/384 max|v''''|, with
  /// v'''' estimated by differencing the stored second derivatives.
  double interpolation_error_bound() const {
    const double h = step();
    double d4 = 0.0;
    for (std::size_t i = 1; i + 1 < d2v.size(); ++i) {
      d4 = std::max(d4, std::abs(d2v[i + 1] - 2.0 * d2v[i] + d2v[i - 1]) / (h * h));
    }
    return h * h * h * h / 384.0 * d4;
  }
};

/// Uniform grid 0 = r_0 < ... < r_M = R.
inline std::vector<double> uniform_grid(double R, std::size_t M) {
  if (M < 4) throw ContractViolation("radial grid needs at least 4 intervals");
  std::vector<double> r(M + 1);
  for (std::size_t i = 0; i <= M; ++i) r[i] = R * static_cast<double>(i) / static_cast<double>(M);
  r.back() = R;
  return r;
}

/// Profile from nodal values with second-order difference derivatives.
/// The pole uses the even extension v(-h) = v(h).
inline RadialProfile profile_from_values(std::vector<double> r, std::vector<double> v, std::string problem) {
  if (r.size() != v.size() || r.size() < 5) throw ContractViolation("profile needs matching grids of >= 5 nodes");
  RadialProfile p;
  const std::size_t n = r.size();
  const double h = r[1] - r[0];
  p.dv.resize(n);
  p.d2v.resize(n);
  p.dv[0] = 0.0;
  p.d2v[0] = 2.0 * (v[1] - v[0]) / (h * h);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    p.dv[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    p.d2v[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
  }
  p.dv[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
  p.d2v[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / (h * h);
  p.r = std::move(r);
  p.v = std::move(v);
  p.problem = std::move(problem);
  p.residual = p.v.back();
  return p;
}

}  // namespace warpconcave

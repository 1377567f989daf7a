#pragma once

#include <cmath>
#include <cstdint>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>

#include "warpconcave/errors.hpp"

namespace warpconcave {

/// First positive zero j_a of the Bessel function J_a, a in [0, 50].
///
/// J_a is positive on (0, j_a) and j_a > a, so a forward scan from a in steps
/// of 0.05 brackets the zero; TOMS 748 then refines it to full precision.
inline double bessel_first_zero(double a) {
  if (!(a >= 0.0 && a <= 50.0)) throw ContractViolation("Bessel order must lie in [0, 50]");
  auto J = [a](double x) { return boost::math::cyl_bessel_j(a, x); };

  constexpr double step = 0.05;
  double lo = a > 0.0 ? a : step;
  double f_lo = J(lo);
  double hi = lo + step;
  double f_hi = J(hi);
  while (f_hi > 0.0) {
    lo = hi;
    f_lo = f_hi;
    hi += step;
    f_hi = J(hi);
    if (hi > a + 100.0) throw SolverFailure("no Bessel zero found in the scan window");
  }
  if (f_hi == 0.0) return hi;

  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(J, lo, hi, f_lo, f_hi,
                                                         boost::math::tools::eps_tolerance<double>(50), max_iter);
  return 0.5 * (bracket.first + bracket.second);
}

}  // namespace warpconcave

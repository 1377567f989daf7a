#pragma once

// q-logarithm, q-exponential and weighted power means.
//
// The transform w = L_{1-alpha}(v) turns alpha-concavity of a positive
// function v into plain concavity of w, so everything downstream goes
// through these three functions.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>

#include "warpconcave/errors.hpp"

namespace warpconcave {

/// Index q of the q-logarithm, restricted to [0, 1].
class QIndex {
 public:
  constexpr explicit QIndex(double q) : q_(q) {
    if (!(q >= 0.0 && q <= 1.0)) throw ContractViolation("q-index must lie in [0, 1]");
  }
  constexpr double value() const noexcept { return q_; }

  /// q = 1 - alpha, the index used for alpha-concavity transforms.
  static constexpr QIndex from_alpha(double alpha) { return QIndex(1.0 - alpha); }

 private:
  double q_;
};

namespace detail {
// Below this distance from q = 1 the closed forms are replaced by log/exp.
inline constexpr double kNearLogGap = 1e-12;
}  // namespace detail

/// Domain floor l_q of the q-exponential: -1/(1-q), or -inf for q = 1.
inline double q_exp_floor(QIndex q) {
  const double gap = 1.0 - q.value();
  if (gap < detail::kNearLogGap) return -std::numeric_limits<double>::infinity();
  return -1.0 / gap;
}

/// L_q(xi) = (xi^{1-q} - 1)/(1-q), with L_1 = log.
template <std::floating_point T>
T q_log(QIndex q, T xi) {
  if (!(xi > T(0))) throw DomainError("q_log requires a positive argument");
  const T gap = T(1) - T(q.value());
  if (gap < T(detail::kNearLogGap)) return std::log(xi);
  return std::expm1(gap * std::log(xi)) / gap;
}

/// Inverse of q_log; E_q(x) = [1 + (1-q)x]^{1/(1-q)} for x > l_q.
template <std::floating_point T>
T q_exp(QIndex q, T x) {
  const T gap = T(1) - T(q.value());
  if (gap < T(detail::kNearLogGap)) return std::exp(x);
  const T floor = T(-1) / gap;
  if (!(x > floor)) {
    throw DomainError("q_exp argument at or below the floor " + std::to_string(double(floor)),
                      double(floor));
  }
  return std::exp(std::log1p(gap * x) / gap);
}

/// Weighted alpha-mean M_alpha(a, b; mu) for alpha in [-inf, +inf].
///
/// Conventions: alpha = 0 is the weighted geometric mean, +-inf are max/min,
/// and for alpha < 0 the mean vanishes whenever a*b = 0. The geometric case
/// is evaluated in log space; the generic case is scaled by max(a, b) so that
/// neither overflow nor underflow occurs for extreme inputs.
inline double alpha_mean(double alpha, double a, double b, double mu) {
  if (!(mu > 0.0 && mu < 1.0)) throw DomainError("alpha_mean weight must lie in (0, 1)");
  if (!(a >= 0.0 && b >= 0.0)) throw DomainError("alpha_mean requires nonnegative arguments");
  if (std::isnan(alpha)) throw DomainError("alpha_mean index is NaN");

  if (alpha == std::numeric_limits<double>::infinity()) return std::max(a, b);
  if (alpha == -std::numeric_limits<double>::infinity()) return std::min(a, b);
  if (alpha < 0.0 && a * b == 0.0) return 0.0;

  const double wa = 1.0 - mu;
  const double wb = mu;
  if (alpha == 0.0) {
    if (a == 0.0 || b == 0.0) return 0.0;
    return std::exp(wa * std::log(a) + wb * std::log(b));
  }
  const double scale = std::max(a, b);
  if (scale == 0.0) return 0.0;
  const double sa = std::pow(a / scale, alpha);
  const double sb = std::pow(b / scale, alpha);
  return scale * std::pow(wa * sa + wb * sb, 1.0 / alpha);
}

}  // namespace warpconcave

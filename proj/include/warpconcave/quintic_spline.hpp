#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "warpconcave/errors.hpp"

namespace warpconcave {

/// Interpolating quintic B-spline with not-a-knot end conditions.
///
/// The interpolant is C^4, so its third derivative is continuous. Cubic
/// splines have piecewise-constant third derivatives, which is useless for
/// checks on (log sigma)'''.
class QuinticSpline {
 public:
  static constexpr int kDegree = 5;

  QuinticSpline(std::span<const double> x, std::span<const double> y) : lo_(0.0), hi_(0.0) {
    const std::size_t m = x.size();
    if (m != y.size()) throw ContractViolation("spline node/value size mismatch");
    if (m < kDegree + 1) throw ContractViolation("quintic spline needs at least 6 nodes");
    for (std::size_t i = 1; i < m; ++i) {
      if (!(x[i] > x[i - 1])) throw ContractViolation("spline nodes must be strictly increasing");
    }
    lo_ = x.front();
    hi_ = x.back();

    knots_.assign(kDegree + 1, lo_);
    for (std::size_t i = 3; i + 3 < m; ++i) knots_.push_back(x[i]);
    knots_.insert(knots_.end(), kDegree + 1, hi_);

    Eigen::MatrixXd collocation = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t span = find_span(x[j]);
      const auto basis = basis_derivatives(span, x[j]);
      for (int k = 0; k <= kDegree; ++k) collocation(j, span - kDegree + k) = basis[0][k];
    }
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(y.data(), m);
    const Eigen::VectorXd c = collocation.partialPivLu().solve(rhs);
    coef_.assign(c.data(), c.data() + m);
  }

  double lower() const noexcept { return lo_; }
  double upper() const noexcept { return hi_; }

  /// Value and first three derivatives at u in [lower, upper].
  std::array<double, 4> derivatives(double u) const {
    if (u < lo_ || u > hi_) throw DomainError("spline evaluated outside its node range");
    const std::size_t span = find_span(u);
    const auto basis = basis_derivatives(span, u);
    std::array<double, 4> out{};
    for (int d = 0; d < 4; ++d) {
      double acc = 0.0;
      for (int k = 0; k <= kDegree; ++k) acc += basis[d][k] * coef_[span - kDegree + k];
      out[d] = acc;
    }
    return out;
  }

 private:
  std::size_t find_span(double u) const {
    const std::size_t n = knots_.size() - kDegree - 2;
    if (u >= knots_[n + 1]) return n;
    const auto it = std::upper_bound(knots_.begin() + kDegree, knots_.begin() + n + 1, u);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  // Nonzero basis functions and their first three derivatives on a span
  // (Piegl & Tiller, algorithm A2.3).
  std::array<std::array<double, kDegree + 1>, 4> basis_derivatives(std::size_t span,
                                                                   double u) const {
    constexpr int p = kDegree;
    std::array<std::array<double, p + 1>, p + 1> ndu{};
    std::array<double, p + 1> left{}, right{};
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[j] = u - knots_[span + 1 - j];
      right[j] = knots_[span + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        ndu[j][r] = right[r + 1] + left[j - r];
        const double temp = ndu[r][j - 1] / ndu[j][r];
        ndu[r][j] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      ndu[j][j] = saved;
    }

    std::array<std::array<double, p + 1>, 4> ders{};
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];

    std::array<std::array<double, p + 1>, 2> a{};
    for (int r = 0; r <= p; ++r) {
      int s1 = 0, s2 = 1;
      a[0][0] = 1.0;
      for (int k = 1; k <= 3; ++k) {
        double d = 0.0;
        const int rk = r - k, pk = p - k;
        if (r >= k) {
          a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
          d = a[s2][0] * ndu[rk][pk];
        }
        const int j1 = rk >= -1 ? 1 : -rk;
        const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
        for (int j = j1; j <= j2; ++j) {
          a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
          d += a[s2][j] * ndu[rk + j][pk];
        }
        if (r <= pk) {
          a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
          d += a[s2][k] * ndu[r][pk];
        }
        ders[k][r] = d;
        std::swap(s1, s2);
      }
    }
    double factor = p;
    for (int k = 1; k <= 3; ++k) {
      for (int j = 0; j <= p; ++j) ders[k][j] *= factor;
      factor *= (p - k);
    }
    return ders;
  }

  std::vector<double> knots_;
  std::vector<double> coef_;
  double lo_, hi_;
};

}  // namespace warpconcave

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "warpconcave/heat_kernel.hpp"

using namespace warpconcave;

namespace {
constexpr double kPi = std::numbers::pi;

// Radial heat operator residual d_t G - G'' - (N-1) (log sigma_K)' G' by
// central differences.
double pde_residual(const KernelSpec& s, double rho) {
  const double h = 1e-3, k = 1e-4;
  auto G = [&](double r, double t) { return kernel_value({s.N, s.K, t}, r); };
  const double gt = (G(rho, s.t + k) - G(rho, s.t - k)) / (2.0 * k);
  const double g1 = (G(rho + h, s.t) - G(rho - h, s.t)) / (2.0 * h);
  const double g2 = (G(rho + h, s.t) - 2.0 * G(rho, s.t) + G(rho - h, s.t)) / (h * h);
  const double c = std::sqrt(-s.K);
  const double d1 = s.K == 0.0 ? 1.0 / rho : c / std::tanh(c * rho);
  return (gt - g2 - (s.N - 1) * d1 * g1) / G(rho, s.t);
}
}  // namespace

TEST(KernelValue, GaussianAtPole) {
  EXPECT_NEAR(kernel_value({2, 0.0, 1.0 / (4.0 * kPi)}, 0.0), 1.0, 1e-14);
  EXPECT_NEAR(kernel_value({3, 0.0, 0.5}, 1.0), std::pow(2.0 * kPi, -1.5) * std::exp(-0.5), 1e-15);
}

TEST(KernelValue, HyperbolicThreeAtPole) {
  EXPECT_NEAR(kernel_value({3, -1.0, 1.0}, 0.0), std::pow(4.0 * kPi, -1.5) * std::exp(-1.0), 1e-16);
  EXPECT_NEAR(kernel_value({3, -1.0, 1.0}, 1e-6) / kernel_value({3, -1.0, 1.0}, 0.0), 1.0, 1e-12);
}

TEST(KernelValue, ContinuousAcrossSmallRadiusBranches) {
  for (int N : {2, 3, 4, 5}) {
    for (double r : {1e-4, 1e-3, 1e-2}) {
      const double below = kernel_log_value({N, -1.0, 0.7}, r * (1.0 - 1e-6));
      const double above = kernel_log_value({N, -1.0, 0.7}, r * (1.0 + 1e-6));
      EXPECT_NEAR(below, above, 1e-9) << "N " << N << " r " << r;
    }
  }
}

TEST(KernelValue, Contracts) {
  EXPECT_THROW(kernel_value({3, 0.0, 0.0}, 1.0), DomainError);
  EXPECT_THROW(kernel_value({3, 1.0, 1.0}, 1.0), DomainError);
  EXPECT_THROW(kernel_value({6, -1.0, 1.0}, 1.0), Unsupported);
  EXPECT_THROW(kernel_value({1, 0.0, 1.0}, 1.0), ContractViolation);
  EXPECT_THROW(kernel_value({3, 0.0, 1.0}, -0.1), ContractViolation);
}

TEST(KernelValue, LogSpaceBeyondUnderflow) {
  // rho^2/4t = 2500: the value underflows but the logarithm stays exact.
  const KernelSpec s{3, -1.0, 0.01};
  const double rho = 10.0;
  EXPECT_EQ(kernel_value(s, rho), 0.0);
  const double expected =
      -1.5 * std::log(4.0 * kPi * s.t) + std::log(rho / std::sinh(rho)) - s.t - rho * rho / (4.0 * s.t);
  EXPECT_NEAR(kernel_log_value(s, rho), expected, 1e-12 * std::abs(expected));
}

TEST(KernelValue, CurvatureScaling) {
  for (int N : {2, 3, 4, 5}) {
    for (double rho : {0.0, 0.3, 1.2}) {
      const double lhs = kernel_log_value({N, -4.0, 0.25}, rho);
      const double rhs = 0.5 * N * std::log(4.0) + kernel_log_value({N, -1.0, 1.0}, 2.0 * rho);
      EXPECT_NEAR(lhs, rhs, 1e-12);
    }
  }
}

TEST(KernelMass, UnitMass) {
  for (int N : {2, 3, 4, 5}) {
    for (double t : {0.5, 1.0}) {
      EXPECT_NEAR(kernel_mass({N, 0.0, t}, 20.0), 1.0, 1e-8) << "N " << N;
    }
  }
  EXPECT_NEAR(kernel_mass({3, -1.0, 1.0}, 30.0), 1.0, 1e-6);
  EXPECT_NEAR(kernel_mass({5, -1.0, 1.0}, 30.0), 1.0, 1e-5);
  EXPECT_NEAR(kernel_mass({2, -1.0, 1.0}, 30.0), 1.0, 1e-6);
  EXPECT_NEAR(kernel_mass({4, -1.0, 1.0}, 30.0), 1.0, 1e-5);
  EXPECT_NEAR(kernel_mass({3, -4.0, 0.3}, 20.0), 1.0, 1e-6);
}

TEST(KernelMass, RejectsShortTruncation) { EXPECT_THROW(kernel_mass({3, -1.0, 1.0}, 3.0), ContractViolation); }

TEST(KernelPde, ResidualVanishes) {
  for (int N : {2, 3, 4, 5}) {
    for (double K : {0.0, -1.0}) {
      for (double rho : {0.4, 1.0, 2.0}) {
        EXPECT_LT(std::abs(pde_residual({N, K, 0.8}, rho)), 1e-5) << "N " << N << " K " << K << " rho " << rho;
      }
    }
  }
}

TEST(KernelSemigroup, HyperbolicThree) {
  // int Gamma(d(x,z), t1) Gamma(|z|, t2) dV(z) = Gamma(|x|, t1 + t2).
  using boost::math::quadrature::gauss_kronrod;
  const double t1 = 0.3, t2 = 0.7;
  for (double rx : {0.5, 1.5}) {
    auto radial = [&](double r) {
      auto angular = [&](double theta) {
        const double c = std::cosh(rx) * std::cosh(r) - std::sinh(rx) * std::sinh(r) * std::cos(theta);
        const double d = std::acosh(std::max(c, 1.0));
        return kernel_value({3, -1.0, t1}, d) * std::sin(theta);
      };
      const double inner = gauss_kronrod<double, 31>::integrate(angular, 0.0, kPi, 10, 1e-12);
      return 2.0 * kPi * inner * kernel_value({3, -1.0, t2}, r) * std::sinh(r) * std::sinh(r);
    };
    const double lhs = gauss_kronrod<double, 31>::integrate(radial, 0.0, 15.0, 10, 1e-12);
    const double rhs = kernel_value({3, -1.0, t1 + t2}, rx);
    EXPECT_NEAR(lhs, rhs, 1e-4 * rhs) << "rho " << rx;
  }
}

TEST(SpaceFormDistance, MatchesLawOfCosines) {
  const PolarPoint p{0.8, 0.1}, q{1.3, 2.0};
  const double c = std::cosh(0.8) * std::cosh(1.3) - std::sinh(0.8) * std::sinh(1.3) * std::cos(1.9);
  EXPECT_NEAR(space_form_distance(-1.0, p, q), std::acosh(c), 1e-12);
  EXPECT_NEAR(space_form_distance(0.0, p, q), std::sqrt(0.64 + 1.69 - 2.08 * std::cos(1.9)), 1e-14);
  for (double K : {0.0, -1.0, -3.0}) {
    EXPECT_NEAR(space_form_distance_along(K, p, q, 0.0), p.radius, 1e-12);
    EXPECT_NEAR(space_form_distance_along(K, p, q, 1.0), q.radius, 1e-12);
  }
  // A chord through the pole.
  EXPECT_NEAR(space_form_distance_along(-1.0, {1.0, 0.0}, {1.0, kPi}, 0.25), 0.5, 1e-12);
}

TEST(KernelLogConcavity, FlatGapsFollowQuadraticLaw) {
  for (int N : {2, 3, 5}) {
    for (double t : {0.5, 1.0}) {
      const KernelSpec s{N, 0.0, t};
      const auto cert = kernel_log_concavity(s, 3.0);
      EXPECT_EQ(cert.verdict, Verdict::certified_strict);
      for (const auto& g : cert.geodesic_results) {
        const double d = space_form_distance(0.0, g.p, g.q);
        const double expected = g.t * (1.0 - g.t) * d * d / (4.0 * t);
        EXPECT_NEAR(g.gap, expected, 1e-8 * expected);
        if (std::abs(g.t - 0.5) < 1e-15) { EXPECT_NEAR(g.gap, d * d / (16.0 * t), 1e-8 * expected); }
      }
    }
  }
}

TEST(KernelLogConcavity, HyperbolicStrict) {
  for (int N : {2, 3, 5}) {
    for (double t : {0.5, 1.0}) {
      const auto cert = kernel_log_concavity({N, -1.0, t}, 3.0);
      EXPECT_EQ(cert.verdict, Verdict::certified_strict) << "N " << N << " t " << t;
      EXPECT_GT(cert.min_gap, 0.0);
      EXPECT_LT(cert.max_w2, 0.0);
    }
  }
}

TEST(KernelLogConcavity, HyperbolicThreeRadialSecondDerivative) {
  // (log Gamma)'' = d^2/drho^2 log(rho/sinh rho) - 1/(2t) = -1/rho^2 + 1/sinh^2 rho - 1/(2t).
  const double t = 1.0, h = 1e-3;
  for (double rho : {0.5, 1.0, 2.0, 2.9}) {
    auto L = [&](double r) { return kernel_log_value({3, -1.0, t}, r); };
    const double fd = (L(rho + h) - 2.0 * L(rho) + L(rho - h)) / (h * h);
    const double exact = -1.0 / (rho * rho) + 1.0 / std::pow(std::sinh(rho), 2) - 1.0 / (2.0 * t);
    EXPECT_NEAR(fd, exact, 1e-6);
  }
}

TEST(KernelLogConcavity, MarginPersistsForLargeTimes) {
  double previous = -INFINITY;
  for (double t : {0.1, 1.0, 10.0}) {
    const auto cert = kernel_log_concavity({3, -1.0, t}, 3.0);
    EXPECT_EQ(cert.verdict, Verdict::certified_strict) << "t " << t;
    EXPECT_GT(cert.max_w2, previous);
    previous = cert.max_w2;
  }
  EXPECT_LT(previous, 0.0);
}

TEST(DeltaApproximation, MatchesClosedForm) {
  const auto states = delta_approximation(3, -1.0, {0.5});
  const auto& p = states.back().profile;
  for (std::size_t i = 0; p.r[i] <= 3.0; i += 25) {
    const double ref = kernel_value({3, -1.0, 0.5}, p.r[i]);
    EXPECT_NEAR(p.v[i], ref, 1e-3 * ref) << "rho " << p.r[i];
  }
}

TEST(DeltaApproximation, CurvatureMinusFour) {
  // Independent check of the curvature rescaling.
  const auto states = delta_approximation(2, -4.0, {0.25});
  const auto& p = states.back().profile;
  for (std::size_t i = 0; p.r[i] <= 1.5; i += 25) {
    const double ref = kernel_value({2, -4.0, 0.25}, p.r[i]);
    EXPECT_NEAR(p.v[i], ref, 1e-3 * ref) << "rho " << p.r[i];
  }
}

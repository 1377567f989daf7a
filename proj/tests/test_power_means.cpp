#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "warpconcave/power_means.hpp"

using namespace warpconcave;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return out;
}
}  // namespace

TEST(QIndex, RejectsOutOfRange) {
  EXPECT_THROW(QIndex(-0.1), ContractViolation);
  EXPECT_THROW(QIndex(1.5), ContractViolation);
  EXPECT_DOUBLE_EQ(QIndex::from_alpha(0.25).value(), 0.75);
}

TEST(QLog, ClosedFormValues) {
  EXPECT_NEAR(q_log(QIndex(1.0), std::exp(1.0)), 1.0, 1e-15);
  EXPECT_NEAR(q_log(QIndex(0.0), 3.0), 2.0, 1e-15);
  EXPECT_NEAR(q_log(QIndex(0.5), 4.0), 2.0, 1e-15);
}

TEST(QLog, RejectsNonPositive) {
  EXPECT_THROW(q_log(QIndex(0.5), 0.0), DomainError);
  EXPECT_THROW(q_log(QIndex(1.0), -1.0), DomainError);
}

TEST(QLog, ContinuousAcrossLogSwitch) {
  for (double xi : {1e-3, 0.5, 2.0, 1e3}) {
    const double near = q_log(QIndex(1.0 - 1e-11), xi);
    EXPECT_NEAR(near, std::log(xi), 1e-9 * std::abs(std::log(xi)) + 1e-14) << xi;
  }
}

TEST(QExp, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(q_exp(QIndex(1.0), 0.0), 1.0);
  EXPECT_NEAR(q_exp(QIndex(0.5), 2.0), 4.0, 1e-14);
}

TEST(QExp, FloorErrorCarriesBound) {
  try {
    q_exp(QIndex(0.0), -1.0);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_DOUBLE_EQ(e.bound(), -1.0);
  }
  EXPECT_DOUBLE_EQ(q_exp_floor(QIndex(0.5)), -2.0);
  EXPECT_EQ(q_exp_floor(QIndex(1.0)), -kInf);
}

// The round trip meets 1e-12 relative in extended precision. In double, the
// q-exponential amplifies the rounding of its argument by |x| xi^{q-1}, which
// reaches ~1e6 for q = 0, xi = 1e-6, so the double check uses that factor.
TEST(QLogExp, InversePairExtendedPrecision) {
  for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (double xi : log_spaced(1e-6, 1e6, 241)) {
      const long double x = q_log(QIndex(q), static_cast<long double>(xi));
      const long double back = q_exp(QIndex(q), x);
      EXPECT_LE(std::abs(static_cast<double>(back - xi)) / xi, 1e-12) << "q=" << q << " xi=" << xi;
    }
  }
}

TEST(QLogExp, InversePairDoubleWithinConditioning) {
  const double eps = std::numeric_limits<double>::epsilon();
  for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (double xi : log_spaced(1e-6, 1e6, 241)) {
      const double x = q_log(QIndex(q), xi);
      const double back = q_exp(QIndex(q), x);
      const double cond = 1.0 + std::abs(x) * std::pow(xi, q - 1.0);
      EXPECT_LE(std::abs(back - xi) / xi, 8.0 * eps * cond) << "q=" << q << " xi=" << xi;
    }
  }
}

TEST(AlphaMean, CaseTable) {
  EXPECT_NEAR(alpha_mean(0.0, 4.0, 9.0, 0.5), 6.0, 1e-14);
  EXPECT_NEAR(alpha_mean(1.0, 2.0, 4.0, 0.5), 3.0, 1e-15);
  EXPECT_EQ(alpha_mean(-kInf, 2.0, 5.0, 0.3), 2.0);
  EXPECT_EQ(alpha_mean(kInf, 2.0, 5.0, 0.3), 5.0);
  EXPECT_EQ(alpha_mean(-1.0, 0.0, 5.0, 0.3), 0.0);
  EXPECT_EQ(alpha_mean(0.0, 0.0, 5.0, 0.3), 0.0);
  EXPECT_NEAR(alpha_mean(0.5, 0.0, 4.0, 0.5), 1.0, 1e-15);
}

TEST(AlphaMean, RejectsBadWeight) {
  EXPECT_THROW(alpha_mean(1.0, 1.0, 2.0, 0.0), DomainError);
  EXPECT_THROW(alpha_mean(1.0, 1.0, 2.0, 1.0), DomainError);
  EXPECT_THROW(alpha_mean(1.0, -1.0, 2.0, 0.5), DomainError);
}

TEST(AlphaMean, ExtremeMagnitudes) {
  EXPECT_NEAR(alpha_mean(0.0, 1e300, 1e300, 0.5) / 1e300, 1.0, 1e-12);
  EXPECT_NEAR(alpha_mean(2.0, 1e-300, 1e-300, 0.3) / 1e-300, 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(alpha_mean(3.0, 1e300, 1e200, 0.5)));
}

class AlphaMeanProperty : public ::testing::Test {
 protected:
  std::mt19937_64 rng{0x5eed0001ULL};
  double positive() { return std::exp(std::uniform_real_distribution<double>(-8.0, 8.0)(rng)); }
  double weight() { return std::uniform_real_distribution<double>(0.01, 0.99)(rng); }
};

TEST_F(AlphaMeanProperty, NondecreasingInAlpha) {
  const std::vector<double> ladder{-kInf, -1.0, 0.0, 0.5, 1.0, kInf};
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = positive(), b = positive(), mu = weight();
    double prev = -kInf;
    for (double alpha : ladder) {
      const double m = alpha_mean(alpha, a, b, mu);
      EXPECT_GE(m, prev * (1.0 - 1e-14)) << "alpha=" << alpha;
      prev = m;
    }
  }
}

// Swapping the arguments swaps the weights 1 - mu and mu. That is bitwise
// exact whenever 1 - mu is representable exactly, which holds for dyadic mu.
TEST_F(AlphaMeanProperty, WeightSymmetryExactForDyadicWeights) {
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = positive(), b = positive();
    const double mu = std::uniform_int_distribution<int>(1, 63)(rng) / 64.0;
    for (double alpha : {-kInf, -2.0, -1.0, 0.0, 0.3, 0.5, 1.0, 2.0, kInf}) {
      EXPECT_EQ(alpha_mean(alpha, a, b, mu), alpha_mean(alpha, b, a, 1.0 - mu)) << alpha;
    }
  }
}

TEST_F(AlphaMeanProperty, WeightSymmetryGenericWeights) {
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = positive(), b = positive(), mu = weight();
    for (double alpha : {-2.0, 0.0, 0.5, 1.0}) {
      const double lhs = alpha_mean(alpha, a, b, mu);
      EXPECT_NEAR(lhs, alpha_mean(alpha, b, a, 1.0 - mu), 1e-13 * lhs) << alpha;
    }
  }
}

TEST_F(AlphaMeanProperty, Homogeneous) {
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = positive(), b = positive(), mu = weight(), lam = positive();
    for (double alpha : {-kInf, -1.0, 0.0, 0.5, 1.0, 3.0, kInf}) {
      const double lhs = alpha_mean(alpha, lam * a, lam * b, mu);
      const double rhs = lam * alpha_mean(alpha, a, b, mu);
      EXPECT_NEAR(lhs, rhs, 1e-12 * rhs) << alpha;
    }
  }
}

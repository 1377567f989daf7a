#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "warpconcave/appendix_bounds.hpp"
#include "warpconcave/concavity_check.hpp"
#include "warpconcave/elliptic_radial.hpp"

using namespace warpconcave;

namespace {
Ball flat(int N, double R) { return Ball(N, R, WarpedFactor::space_form(0.0)); }
Ball hyperbolic(int N, double R) { return Ball(N, R, WarpedFactor::space_form(-1.0)); }

RadialProfile torsion_values(int N, double R, std::size_t M) {
  const auto r = uniform_grid(R, M);
  std::vector<double> v(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) v[i] = (R * R - r[i] * r[i]) / (2.0 * N);
  v.back() = 0.0;
  return profile_from_values(r, v, "torsion");
}

bool not_violated(Verdict v) { return v != Verdict::violated; }
}  // namespace

TEST(WTransform, AlphaOneIsShift) {
  const auto p = torsion_values(3, 1.0, 256);
  const auto w = w_transform(p, 1.0);
  for (std::size_t i = 0; i < w.w.size(); ++i) EXPECT_DOUBLE_EQ(w.w[i], p.v[i] - 1.0);
}

TEST(WTransform, AlphaZeroIsLog) {
  const auto p = torsion_values(3, 1.0, 256);
  const auto w = w_transform(p, 0.0);
  for (std::size_t i = 0; i < w.w.size(); ++i) EXPECT_NEAR(w.w[i], std::log(p.v[i]), 1e-15);
}

TEST(WTransform, TorsionSecondDerivative) {
  const auto w = w_transform(torsion_values(3, 1.0, 512), 1.0);
  for (std::size_t i = 0; i + 1 < w.w.size(); ++i) EXPECT_NEAR(w.w2[i], -1.0 / 3.0, 1e-8) << "node " << i;
}

TEST(WTransform, RejectsNonpositiveInterior) {
  auto p = torsion_values(3, 1.0, 64);
  p.v[10] = 0.0;
  EXPECT_THROW(w_transform(p, 0.5), DomainError);
  EXPECT_THROW(w_transform(torsion_values(3, 1.0, 64), 1.5), ContractViolation);
}

TEST(CertifyRadial, TorsionStrictAtAlphaOne) {
  const Ball b = flat(3, 1.0);
  const auto cert = certify_radial(torsion_values(3, 1.0, 1024), b, 1.0);
  EXPECT_EQ(cert.verdict, Verdict::certified_strict);
  EXPECT_NEAR(cert.max_w2, -1.0 / 3.0, 1e-8);
  EXPECT_LT(cert.max_w1, 0.0);
  EXPECT_DOUBLE_EQ(cert.boundary_cut, 1.0 / 64.0);
  EXPECT_GT(cert.epsilon, 0.0);
  EXPECT_THROW(certify_radial(torsion_values(3, 1.0, 64), b, 1.1), ContractViolation);
  EXPECT_THROW(certify_radial(torsion_values(3, 1.0, 64), b, 1.0, 0.3), ContractViolation);
}

TEST(CertifyRadial, FlatEigenfunctionAtThreshold) {
  const Ball b = flat(2, 1.0);
  const auto eig = first_eigenpair(b);
  const double A = alpha_threshold(b, eig.lambda1).A;
  EXPECT_NEAR(A, 0.1729150690, 1e-8);
  EXPECT_EQ(certify_radial(eig.profile, b, A).verdict, Verdict::certified_strict);
}

TEST(CertifyRadial, EigenfunctionIsNotConcave) {
  // J_0(j_0 r) has an inflection point at j_0 r ~ 1.84.
  const Ball b = flat(2, 1.0);
  const auto eig = first_eigenpair(b);
  const auto radial = certify_radial(eig.profile, b, 1.0);
  EXPECT_EQ(radial.verdict, Verdict::violated);
  EXPECT_NEAR(radial.max_w2_radius, 1.0, 1.0 / 64.0 + 1e-3);
  EXPECT_EQ(certify_geodesic_samples(b, eig.profile, 1.0).verdict, Verdict::violated);
}

TEST(CertifyRadial, MonotoneInAlpha) {
  const Ball b = hyperbolic(2, 1.0);
  const auto eig = first_eigenpair(b);
  const double A = alpha_threshold(b, eig.lambda1).A;
  for (double a = A; a >= 0.0; a -= A / 8.0) {
    EXPECT_TRUE(not_violated(certify_radial(eig.profile, b, std::max(a, 0.0)).verdict)) << "alpha " << a;
  }
  const auto torsion = solve_power_bvp(b, 1.0, 0.0);
  for (double a : {1.0, 0.75, 0.5, 0.25, 0.0}) {
    EXPECT_TRUE(not_violated(certify_radial(torsion, b, a).verdict)) << "alpha " << a;
  }
}

TEST(CertifyRadial, TransformExactness) {
  // Certifying alpha on v agrees with certifying concavity of w = L_{1-alpha}(v).
  const Ball b = hyperbolic(3, 1.0);
  const auto sol = solve_power_bvp(b, 1.0, 0.5);
  const double alpha = 0.5;
  const auto wt = w_transform(sol, alpha);
  const double lift = 1.0 - *std::min_element(wt.w.begin(), wt.w.end());
  std::vector<double> shifted(sol.r.size(), 0.0);
  for (std::size_t i = 0; i < wt.w.size(); ++i) shifted[i] = wt.w[i] + lift;
  const auto w_profile = profile_from_values(sol.r, shifted, "w");
  const auto on_v = certify_radial(sol, b, alpha);
  const auto on_w = certify_radial(w_profile, b, 1.0, -1.0, on_v.epsilon);
  EXPECT_EQ(on_v.verdict, Verdict::certified_strict);
  EXPECT_EQ(on_v.verdict, on_w.verdict);
  EXPECT_NEAR(on_v.max_w1, on_w.max_w1, 1e-9 * std::abs(on_v.max_w1));
  EXPECT_NEAR(on_v.max_w2, on_w.max_w2, 1e-9 * std::abs(on_v.max_w2));
}

TEST(CertifyRadial, BoundaryCutStability) {
  const Ball b = hyperbolic(2, 1.0);
  const auto eig = first_eigenpair(b);
  const double A = alpha_threshold(b, eig.lambda1).A;
  const auto sqrt_source = solve_power_bvp(b, 1.0, 0.5);
  for (double delta = 1.0 / 16.0; delta >= 1.0 / 512.0; delta /= 2.0) {
    EXPECT_EQ(certify_radial(eig.profile, b, A, delta).verdict, Verdict::certified_strict) << delta;
    EXPECT_EQ(certify_radial(sqrt_source, b, 0.5, delta).verdict, Verdict::certified_strict) << delta;
  }
}

TEST(SampleEndpointPairs, CoverageAndDeterminism) {
  const auto pairs = sample_endpoint_pairs(1.0, 200, 7);
  ASSERT_EQ(pairs.size(), 200u);
  std::set<double> dphi;
  for (const auto& [p, q] : pairs) {
    EXPECT_GE(p.radius, 0.0);
    EXPECT_LE(p.radius, 1.0);
    EXPECT_LE(q.radius, 1.0);
    dphi.insert(q.angle - p.angle);
  }
  EXPECT_EQ(dphi.size(), 200u);
  const auto again = sample_endpoint_pairs(1.0, 200, 7);
  const auto other = sample_endpoint_pairs(1.0, 200, 8);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].first.radius, again[i].first.radius);
    EXPECT_EQ(pairs[i].second.angle, again[i].second.angle);
  }
  EXPECT_NE(pairs[0].first.radius, other[0].first.radius);
}

TEST(SampleEndpointPairs, UniformInRadiusSquared) {
  // Half of the endpoints should fall inside r < R/sqrt(2).
  const auto pairs = sample_endpoint_pairs(2.0, 1000, 3);
  int inside = 0;
  for (const auto& [p, q] : pairs) inside += (p.radius < 2.0 / std::sqrt(2.0)) + (q.radius < 2.0 / std::sqrt(2.0));
  EXPECT_NEAR(inside / 2000.0, 0.5, 0.02);
}

TEST(CertifyGeodesic, RadialChordThroughCentre) {
  const Ball b = flat(3, 1.0);
  const auto p = torsion_values(3, 1.0, 1024);
  const Geodesic g = connect_geodesic(b, {0.6, 0.3}, {0.2, 0.3 + std::numbers::pi});
  EXPECT_NEAR(g.length, 0.8, 1e-9);
  for (double t : {0.1, 0.5, 0.75, 0.9}) {
    const double expected = p.value_at(std::abs(t - 0.75) * 0.8);
    EXPECT_NEAR(p.value_at(g.radius_at(t)), expected, 1e-9);
  }
}

TEST(CertifyGeodesic, SymmetricEndpointsMidpoint) {
  const Ball b = flat(3, 1.0);
  const auto p = torsion_values(3, 1.0, 1024);
  const double r0 = 0.7;
  const Geodesic g = connect_geodesic(b, {r0, 1.0}, {r0, 1.0 + std::numbers::pi});
  const double lhs = p.value_at(g.radius_at(0.5));
  const double rhs = alpha_mean(1.0, p.value_at(r0), p.value_at(r0), 0.5);
  EXPECT_NEAR(lhs, 1.0 / 6.0, 1e-10);
  EXPECT_NEAR(rhs, (1.0 - r0 * r0) / 6.0, 1e-10);
  EXPECT_LT(rhs, lhs);
}

TEST(CertifyGeodesic, HyperbolicEigenfunctionLogConcave) {
  const Ball b = hyperbolic(2, 1.0);
  const auto eig = first_eigenpair(b);
  const auto geo = certify_geodesic_samples(b, eig.profile, 0.0);
  EXPECT_EQ(geo.verdict, Verdict::certified_strict);
  EXPECT_EQ(geo.geodesic_results.size() + geo.skipped_near_pole, 200u * 9u);
  EXPECT_GT(geo.min_gap, 0.0);
  for (const auto& r : geo.geodesic_results) {
    EXPECT_EQ(r.gap, r.lhs - r.rhs);
    EXPECT_GT(r.gap, 0.0);
  }
  EXPECT_EQ(certify_radial(eig.profile, b, 0.0).verdict, Verdict::certified_strict);
  EXPECT_GT(geo.interpolation_error, 0.0);
  EXPECT_LT(geo.interpolation_error, 1e-10);
}

TEST(CertifyGeodesic, ConsistentWithRadial) {
  GeodesicSamplingOptions opt;
  opt.n_pairs = 60;
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3}) {
      const Ball b(N, 1.0, WarpedFactor::space_form(K));
      for (double gamma : {0.0, 0.5}) {
        const auto sol = solve_power_bvp(b, 1.0, gamma);
        for (double alpha : {1.0 - gamma, 0.5 * (1.0 - gamma), 0.0}) {
          const auto radial = certify_radial(sol, b, alpha);
          if (radial.verdict != Verdict::certified_strict) continue;
          EXPECT_TRUE(not_violated(certify_geodesic_samples(b, sol, alpha, opt).verdict))
              << "K " << K << " N " << N << " gamma " << gamma << " alpha " << alpha;
        }
      }
    }
  }
}

TEST(CertifyBoth, CombinesVerdicts) {
  const Ball b = flat(2, 1.0);
  const auto eig = first_eigenpair(b);
  GeodesicSamplingOptions opt;
  opt.n_pairs = 40;
  const auto good = certify_both(eig.profile, b, 0.1, opt);
  EXPECT_EQ(good.method, CertificateMethod::both);
  EXPECT_EQ(good.verdict, Verdict::certified_strict);
  EXPECT_FALSE(good.geodesic_results.empty());
  EXPECT_EQ(certify_both(eig.profile, b, 1.0, opt).verdict, Verdict::violated);
  EXPECT_EQ(combine(Verdict::certified_strict, Verdict::certified_weak), Verdict::certified_weak);
  EXPECT_EQ(combine(Verdict::violated, Verdict::certified_strict), Verdict::violated);
}

#pragma once

// alpha-concavity certificates for radial profiles: the radial criterion
// (w = L_{1-alpha}(v) decreasing and strictly concave) and direct sampling
// of the alpha-mean inequality along minimal geodesics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "warpconcave/errors.hpp"
#include "warpconcave/power_means.hpp"
#include "warpconcave/radial_profile.hpp"
#include "warpconcave/warped_geometry.hpp"

namespace warpconcave {

enum class Verdict { certified_strict, certified_weak, violated };
enum class CertificateMethod { radial, geodesic, both };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::certified_strict:
      return "certified_strict";
    case Verdict::certified_weak:
      return "certified_weak";
    case Verdict::violated:
      return "violated";
  }
  return "?";
}

inline std::string to_string(CertificateMethod m) {
  switch (m) {
    case CertificateMethod::radial:
      return "radial";
    case CertificateMethod::geodesic:
      return "geodesic";
    case CertificateMethod::both:
      return "both";
  }
  return "?";
}

/// Worse of two verdicts.
inline Verdict combine(Verdict a, Verdict b) { return static_cast<Verdict>(std::max(int(a), int(b))); }

/// One instance of the alpha-mean inequality u(c(t)) >= M_alpha(u(c(0)), u(c(1)); t).
struct GeodesicResult {
  PolarPoint p;
  PolarPoint q;
  double t;
  double lhs;
  double rhs;
  double gap;  ///< lhs - rhs
};

struct ConcavityCertificate {
  double alpha = 1.0;
  CertificateMethod method = CertificateMethod::radial;
  Verdict verdict = Verdict::violated;
  double boundary_cut = 0.0;
  double epsilon = 0.0;
  // Radial criterion.
  double max_w1 = std::numeric_limits<double>::quiet_NaN();  ///< max w' on (h, R - delta]
  double max_w2 = std::numeric_limits<double>::quiet_NaN();  ///< max w'' on [0, R - delta]
  double max_w1_radius = 0.0;
  double max_w2_radius = 0.0;
  // Geodesic criterion.
  std::vector<GeodesicResult> geodesic_results;
  double min_gap = std::numeric_limits<double>::quiet_NaN();
  double interpolation_error = 0.0;
  std::size_t skipped_near_pole = 0;
};

/// w = L_{1-alpha}(v) on the nodes where v > 0, with central differences.
struct WTransform {
  std::vector<double> r;
  std::vector<double> w;
  std::vector<double> w1;  ///< valid on nodes 0..size-2
  std::vector<double> w2;  ///< valid on nodes 0..size-2
};

/// Applies the q-log transform on the interior nodes 0..M-1 of a profile.
/// Node 0 uses the even extension (w' = 0, w'' = 2(w_1 - w_0)/h^2).
inline WTransform w_transform(const RadialProfile& profile, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must lie in [0, 1]");
  const QIndex q = QIndex::from_alpha(alpha);
  const std::size_t n = profile.intervals();  // interior nodes 0..M-1
  const double h = profile.step();
  WTransform out;
  out.r.assign(profile.r.begin(), profile.r.begin() + n);
  out.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(profile.v[i] > 0.0)) {
      throw DomainError("profile not positive at interior node r = " + std::to_string(profile.r[i]));
    }
    out.w[i] = q_log(q, profile.v[i]);
  }
  out.w1.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.w2.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.w1[0] = 0.0;
  out.w2[0] = 2.0 * (out.w[1] - out.w[0]) / (h * h);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out.w1[i] = (out.w[i + 1] - out.w[i - 1]) / (2.0 * h);
    out.w2[i] = (out.w[i + 1] - 2.0 * out.w[i] + out.w[i - 1]) / (h * h);
  }
  return out;
}

/// Radial certificate for alpha-concavity of v on the ball.
///
/// Strict: w' < 0 on (h, R - delta] and w'' < -eps on [0, R - delta].
/// Weak: w' <= eps R and w'' <= eps on the same ranges. delta defaults to
/// R/64; eps defaults to 1e-8 osc(w)/R^2, with osc(w) the variation of w over
/// [0, R - delta].
inline ConcavityCertificate certify_radial(const RadialProfile& profile, const Ball& ball, double alpha,
                                           double delta = -1.0, double eps = -1.0) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must lie in [0, 1]");
  const double R = ball.radius();
  if (std::abs(profile.radius() - R) > 1e-12 * R) throw ContractViolation("profile grid does not span the ball");
  if (delta < 0.0) delta = R / 64.0;
  if (!(delta > 0.0 && delta < R / 4.0)) throw ContractViolation("boundary cut delta must lie in (0, R/4)");

  const double h = profile.step();
  const std::size_t last = static_cast<std::size_t>(std::floor((R - delta) / h * (1.0 + 1e-14)));
  if (last + 1 >= profile.intervals() || last < 2) throw ContractViolation("grid too coarse for the boundary cut");

  // Only nodes up to last + 1 are needed, so values beyond the collar may vanish.
  RadialProfile inner;
  inner.r.assign(profile.r.begin(), profile.r.begin() + last + 3);
  inner.v.assign(profile.v.begin(), profile.v.begin() + last + 3);
  inner.v.back() = 0.0;
  const WTransform wt = w_transform(inner, alpha);

  ConcavityCertificate cert;
  cert.alpha = alpha;
  cert.method = CertificateMethod::radial;
  cert.boundary_cut = delta;
  const double osc = std::abs(wt.w[0] - wt.w[last]);
  if (eps < 0.0) eps = 1e-8 * osc / (R * R);
  cert.epsilon = eps;

  cert.max_w1 = -std::numeric_limits<double>::infinity();
  cert.max_w2 = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= last; ++i) {
    if (i >= 2 && wt.w1[i] > cert.max_w1) {
      cert.max_w1 = wt.w1[i];
      cert.max_w1_radius = wt.r[i];
    }
    if (wt.w2[i] > cert.max_w2) {
      cert.max_w2 = wt.w2[i];
      cert.max_w2_radius = wt.r[i];
    }
  }
  if (cert.max_w1 < 0.0 && cert.max_w2 < -eps) {
    cert.verdict = Verdict::certified_strict;
  } else if (cert.max_w1 <= eps * R && cert.max_w2 <= eps) {
    cert.verdict = Verdict::certified_weak;
  } else {
    cert.verdict = Verdict::violated;
  }
  return cert;
}

/// Van der Corput radical inverse of i in the given base.
inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, x = 0.0;
  while (i > 0) {
    x += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return x;
}

/// Endpoint pairs uniform in (radius^2, angle), from a 4-D Halton sequence
/// (bases 2, 3, 5, 7) with a seeded Cranley-Patterson shift.
///
/// Halton rather than Sobol: pairs are judged by coordinate differences, and
/// the digital structure of Sobol points collapses those onto few values.
inline std::vector<std::pair<PolarPoint, PolarPoint>> sample_endpoint_pairs(double R, std::size_t n_pairs,
                                                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double shift[4];
  for (double& s : shift) s = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  constexpr unsigned bases[4] = {2, 3, 5, 7};
  std::vector<std::pair<PolarPoint, PolarPoint>> pairs;
  pairs.reserve(n_pairs);
  for (std::uint64_t i = 1; pairs.size() < n_pairs; ++i) {
    double u[4];
    for (int k = 0; k < 4; ++k) {
      const double x = radical_inverse(i, bases[k]) + shift[k];
      u[k] = x - std::floor(x);
    }
    const PolarPoint p{R * std::sqrt(u[0]), 2.0 * std::numbers::pi * u[1] - std::numbers::pi};
    const PolarPoint q{R * std::sqrt(u[2]), 2.0 * std::numbers::pi * u[3] - std::numbers::pi};
    if (p.radius >= R || q.radius >= R) continue;
    pairs.emplace_back(p, q);
  }
  return pairs;
}

struct GeodesicSamplingOptions {
  std::size_t n_pairs = 200;
  std::size_t n_params = 9;
  double eps = 1e-10;  ///< strictness margin, relative to max v
  std::uint64_t seed = 0x5eedULL;
  double connect_tol = 1e-10;
  std::size_t steps = 2048;
};

/// Checks u(c(t)) > M_alpha(u(c(0)), u(c(1)); t) + eps max(v) on minimal
/// geodesics between sampled endpoint pairs, at t = j/(n_params + 1).
///
/// Parameters within 1e-3 of a passage through the centre are skipped. When
/// an endpoint value vanishes only the weak inequality is required.
inline ConcavityCertificate certify_geodesic_samples(const Ball& ball, const RadialProfile& profile, double alpha,
                                                     const GeodesicSamplingOptions& opt = {}) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must lie in [0, 1]");
  if (std::abs(profile.radius() - ball.radius()) > 1e-12 * ball.radius()) {
    throw ContractViolation("profile grid does not span the ball");
  }
  if (opt.n_pairs == 0 || opt.n_params == 0) throw ContractViolation("need at least one pair and one parameter");

  ConcavityCertificate cert;
  cert.alpha = alpha;
  cert.method = CertificateMethod::geodesic;
  cert.epsilon = opt.eps;
  cert.interpolation_error = profile.interpolation_error_bound();
  const double scale = profile.max_value();
  const double margin = opt.eps * scale;
  auto u = [&](double rho) { return std::max(profile.value_at(rho), 0.0); };

  bool strict = true, weak = true;
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& [p, q] : sample_endpoint_pairs(ball.radius(), opt.n_pairs, opt.seed)) {
    const Geodesic g = connect_geodesic(ball, p, q, opt.connect_tol, opt.steps);
    const double up = u(p.radius), uq = u(q.radius);
    const bool positive_ends = up > 0.0 && uq > 0.0;
    for (std::size_t j = 1; j <= opt.n_params; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(opt.n_params + 1);
      if (g.through_pole && std::abs(t - g.pole_parameter) < 1e-3) {
        ++cert.skipped_near_pole;
        continue;
      }
      const double lhs = u(g.radius_at(t));
      const double rhs = alpha_mean(alpha, up, uq, t);
      const double gap = lhs - rhs;
      cert.geodesic_results.push_back({p, q, t, lhs, rhs, gap});
      min_gap = std::min(min_gap, gap);
      if (positive_ends) {
        if (!(gap > margin)) strict = false;
      }
      if (gap < -margin) weak = false;
    }
  }
  cert.min_gap = min_gap;
  cert.verdict = strict && weak ? Verdict::certified_strict : (weak ? Verdict::certified_weak : Verdict::violated);
  return cert;
}

/// Runs both criteria and combines their verdicts.
inline ConcavityCertificate certify_both(const RadialProfile& profile, const Ball& ball, double alpha,
                                         const GeodesicSamplingOptions& opt = {}, double delta = -1.0,
                                         double eps = -1.0) {
  ConcavityCertificate radial = certify_radial(profile, ball, alpha, delta, eps);
  ConcavityCertificate geo = certify_geodesic_samples(ball, profile, alpha, opt);
  radial.method = CertificateMethod::both;
  radial.verdict = combine(radial.verdict, geo.verdict);
  radial.geodesic_results = std::move(geo.geodesic_results);
  radial.min_gap = geo.min_gap;
  radial.interpolation_error = geo.interpolation_error;
  radial.skipped_near_pole = geo.skipped_near_pole;
  return radial;
}

}  // namespace warpconcave

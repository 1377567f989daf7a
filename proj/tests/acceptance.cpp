// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "warpconcave/appendix_bounds.hpp"
#include "warpconcave/concavity_check.hpp"
#include "warpconcave/elliptic_radial.hpp"
#include "warpconcave/heat_kernel.hpp"
#include "warpconcave/parabolic_radial.hpp"
#include "warpconcave/suite.hpp"

using namespace warpconcave;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " FAILED[" << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Ball space_form_ball(double K, int N, double R) { return Ball(N, R, WarpedFactor::space_form(K)); }

// First positive zero of J_0 by sign-change bisection on std::cyl_bessel_j.
double j0_zero() {
  double lo = 2.0, hi = 3.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::cyl_bessel_j(0.0, mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double sigma_K(double K, double R) {
  if (K == 0.0) return R;
  const double c = std::sqrt(std::abs(K));
  return K < 0.0 ? std::sinh(c * R) / c : std::sin(c * R) / c;
}

RadialProfile sampled(double R, std::size_t M, const std::function<double(double)>& f) {
  const auto r = uniform_grid(R, M);
  std::vector<double> v(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) v[i] = f(r[i]);
  v.back() = 0.0;
  return profile_from_values(r, v, "initial");
}

EvolveOptions certified_steps() {
  EvolveOptions o;
  o.dt_growth = 1.05;
  o.dt_max = 2e-4;
  return o;
}

Outcome torsion_exactness() {
  Outcome o;
  const Ball ball = space_form_ball(0.0, 3, 1.0);
  const auto t0 = Clock::now();
  const auto p = solve_power_bvp(ball, 1.0, 0.0, 1e-8, 4096);
  const double elapsed = seconds_since(t0);
  double err = 0.0;
  for (std::size_t i = 0; i < p.r.size(); ++i) err = std::max(err, std::abs(p.v[i] - (1.0 - p.r[i] * p.r[i]) / 6.0));
  o.detail << "M=" << p.r.size() - 1 << " max_error=" << err << " time=" << elapsed << "s";
  o.require(p.r.size() == 4097, "grid size");
  o.require(err <= 1e-8, "error");
  o.require(elapsed < 1.0, "runtime");
  return o;
}

Outcome eigenvalue_anchors() {
  Outcome o;
  const double l3 = first_eigenpair(space_form_ball(0.0, 3, 1.0)).lambda1;
  const double l2 = first_eigenpair(space_form_ball(0.0, 2, 1.0)).lambda1;
  const double j0 = j0_zero();
  const double e3 = std::abs(l3 - kPi * kPi) / (kPi * kPi);
  const double e2 = std::abs(l2 - j0 * j0) / (j0 * j0);
  o.detail << "rel_err(N=3)=" << e3 << " rel_err(N=2)=" << e2;
  o.require(e3 <= 1e-6, "N=3");
  o.require(e2 <= 1e-6, "N=2");
  return o;
}

Outcome elliptic_concavity() {
  Outcome o;
  const auto t0 = Clock::now();
  int strict = 0, total = 0;
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3}) {
      const Ball ball = space_form_ball(K, N, 1.0);
      for (double gamma : {0.0, 0.5, 1.0}) {
        const double alpha = 1.0 - gamma;
        const RadialProfile v = gamma < 1.0 ? solve_power_bvp(ball, 1.0, gamma) : first_eigenpair(ball).profile;
        const auto radial = certify_radial(v, ball, alpha);
        const auto geo = certify_geodesic_samples(ball, v, alpha, {.n_pairs = 200, .n_params = 9});
        const bool ok = radial.verdict == Verdict::certified_strict && geo.verdict == Verdict::certified_strict &&
                        geo.geodesic_results.size() + geo.skipped_near_pole == 200 * 9;
        ++total;
        if (ok) ++strict;
        std::ostringstream tag;
        tag << "K=" << K << ",N=" << N << ",gamma=" << gamma << ":" << to_string(radial.verdict) << "/"
            << to_string(geo.verdict);
        o.require(ok, tag.str());
      }
    }
  }
  const double elapsed = seconds_since(t0);
  o.detail << strict << "/" << total << " strict, time=" << elapsed << "s";
  o.require(elapsed < 30.0, "runtime");
  return o;
}

Outcome eigenfunction_threshold() {
  Outcome o;
  double worst_rel = 0.0;
  int strict = 0, total = 0;
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3}) {
      for (double R : {0.5, 1.0}) {
        const Ball ball = space_form_ball(K, N, R);
        const auto eig = first_eigenpair(ball);
        const auto th = alpha_threshold(ball, eig.lambda1);
        const double s = sigma_K(K, R);
        const double closed = (N - 1) / eig.lambda1 / (s * s);
        const double rel = std::abs(th.A - closed) / closed;
        worst_rel = std::max(worst_rel, rel);
        const auto cert = certify_both(eig.profile, ball, th.A);
        ++total;
        if (cert.verdict == Verdict::certified_strict) ++strict;
        std::ostringstream tag;
        tag << "K=" << K << ",N=" << N << ",R=" << R;
        o.require(cert.verdict == Verdict::certified_strict, tag.str() + ":" + to_string(cert.verdict));
        o.require(rel <= 1e-6, tag.str() + ":closed form");
      }
    }
  }
  o.detail << strict << "/" << total << " strict at A, worst rel diff from closed form=" << worst_rel;
  return o;
}

Outcome heat_flow_log_concavity() {
  Outcome o;
  const Ball ball = space_form_ball(-1.0, 2, 1.0);
  const auto eq13 = check_condition(ball, ConditionId::eq13);
  o.require(eq13.holds, "Eq13");
  const auto bump = sampled(1.0, 1024, [](double r) { return (1.0 - r * r) * (1.0 - r * r); });
  o.require(certify_radial(bump, ball, 0.0).verdict == Verdict::certified_strict, "initial log-concave");
  const auto times = geometric_sample_times(10.0, 1e-3);
  const auto states = evolve_adaptive(ball, Nonlinearity::heat(), bump, 10.0, 1e-4, times, certified_steps());
  int strict = 0;
  double t_min = INFINITY, t_max = 0.0;
  for (const auto& s : states) {
    t_min = std::min(t_min, s.t);
    t_max = std::max(t_max, s.t);
    if (certify_radial(s.profile, ball, 0.0).verdict == Verdict::certified_strict) ++strict;
  }
  o.require(strict == static_cast<int>(states.size()) && !states.empty(), "bump strict at every sample");
  o.require(t_min <= 1e-3 && t_max >= 10.0, "sample span");

  const auto ring = sampled(1.0, 1024, [](double r) {
    const double x = (r - 0.5) / 0.1;
    return std::abs(x) < 1.0 ? std::pow(1.0 - x * x, 3) : 0.0;
  });
  const auto ring_times = geometric_sample_times(4.0, 1e-3);
  const auto ring_states =
      evolve_adaptive(ball, Nonlinearity::heat(), ring, 4.0, 1e-4, ring_times, certified_steps());
  // Vanishing at the centre while positive further out rules out log-concavity.
  o.require(ring.v.front() == 0.0 && ring.value_at(0.5) > 0.0, "ring not log-concave");
  const auto T = concavity_onset_time(ring_states, ball, 0.0);
  o.require(T.has_value(), "ring onset");
  o.detail << "Eq13 margin=" << eq13.worst_margin << " bump strict " << strict << "/" << states.size()
           << " on [" << t_min << ", " << t_max << "], ring onset T=" << (T ? std::to_string(*T) : "none");
  return o;
}

Outcome source_steady_state() {
  Outcome o;
  const Ball ball = space_form_ball(0.0, 3, 1.0);
  const auto ss = steady_state(ball, 1.0, 0.0);
  double err = 0.0;
  for (std::size_t i = 0; i < ss.profile.r.size(); ++i) {
    const double r = ss.profile.r[i];
    err = std::max(err, std::abs(ss.profile.v[i] - (1.0 - r * r) / 6.0));
  }
  const auto torsion = solve_power_bvp(ball, 1.0, 0.0);
  double err_bvp = 0.0;
  for (std::size_t i = 0; i < ss.profile.r.size(); ++i) {
    err_bvp = std::max(err_bvp, std::abs(ss.profile.v[i] - torsion.value_at(ss.profile.r[i])));
  }
  const auto zero = sampled(1.0, 512, [](double) { return 0.0; });
  const auto times = geometric_sample_times(4.0, 1e-3);
  const auto states = evolve(ball, Nonlinearity::power_source(1.0, 0.0), zero, 4.0, 1e-3, times);
  const auto T = concavity_onset_time(states, ball, 1.0);
  o.detail << "steady-state error vs closed form=" << err << " vs shooting=" << err_bvp
           << " onset T=" << (T ? std::to_string(*T) : "none");
  o.require(err <= 1e-6, "closed form");
  o.require(err_bvp <= 1e-6, "shooting");
  o.require(T.has_value(), "onset");
  return o;
}

Outcome heat_kernel_checks() {
  Outcome o;
  int strict = 0, total = 0;
  double worst_law = 0.0, worst_mass = 0.0, worst_delta = 0.0;
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3, 5}) {
      for (double t : {0.5, 1.0}) {
        const KernelSpec s{N, K, t};
        const auto cert = kernel_log_concavity(s, 3.0);
        ++total;
        if (cert.verdict == Verdict::certified_strict) ++strict;
        std::ostringstream tag;
        tag << "K=" << K << ",N=" << N << ",t=" << t;
        o.require(cert.verdict == Verdict::certified_strict, tag.str());
        if (K == 0.0) {
          for (const auto& g : cert.geodesic_results) {
            if (std::abs(g.t - 0.5) > 1e-15) continue;
            const double d = space_form_distance(0.0, g.p, g.q);
            const double expected = d * d / (16.0 * t);
            worst_law = std::max(worst_law, std::abs(g.gap - expected) / expected);
          }
        }
        const double mass_err = std::abs(kernel_mass(s, 30.0) - 1.0);
        worst_mass = std::max(worst_mass, mass_err);
        o.require(mass_err <= (K == 0.0 ? 1e-8 : 1e-5), tag.str() + ":mass");
      }
    }
  }
  o.require(worst_law <= 1e-8, "d^2/(16t) law");
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3, 5}) {
      const std::vector<double> times{0.5, 1.0};
      const auto states = delta_approximation(N, K, times);
      for (const auto& st : states) {
        const auto& p = st.profile;
        for (std::size_t i = 0; i < p.r.size() && p.r[i] <= 3.0; ++i) {
          const double ref = kernel_value({N, K, st.t}, p.r[i]);
          worst_delta = std::max(worst_delta, std::abs(p.v[i] - ref) / ref);
        }
      }
    }
  }
  o.require(worst_delta <= 1e-3, "delta approximation");
  o.detail << strict << "/" << total << " strict, worst midpoint law rel err=" << worst_law
           << ", worst |mass-1|=" << worst_mass << ", worst delta-approximation rel err=" << worst_delta;
  return o;
}

Outcome cheng_and_curvature() {
  Outcome o;
  double worst_eq = 0.0, min_cubic_gap = INFINITY;
  for (double K : {0.0, -1.0, 1.0}) {
    for (int N : {2, 3}) {
      const auto rep = cheng_check(space_form_ball(K, N, 1.0));
      worst_eq = std::max(worst_eq, std::abs(rep.relative_gap));
      o.require(rep.holds, "cheng holds on space form");
    }
  }
  o.require(worst_eq <= 1e-5, "equality");
  for (int N : {2, 3}) {
    const auto rep = cheng_check(Ball(N, 1.0, WarpedFactor::cubic_perturbed(0.1)));
    min_cubic_gap = std::min(min_cubic_gap, rep.relative_gap);
    o.require(rep.holds && rep.relative_gap > 1e-6, "strict on cubic");
  }
  int estimates = 0;
  auto check_estimate = [&](const Ball& ball, const std::string& tag) {
    const auto th = alpha_threshold(ball, first_eigenpair(ball).lambda1);
    ++estimates;
    o.require(th.curvature_estimate >= th.A * (1.0 - 1e-12), tag);
  };
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3}) {
      for (double R : {0.5, 1.0}) check_estimate(space_form_ball(K, N, R), "estimate on space form");
    }
  }
  for (double c : {0.1, -0.02, -0.05}) {
    for (int N : {2, 3}) check_estimate(Ball(N, 1.0, WarpedFactor::cubic_perturbed(c)), "estimate on cubic");
  }
  o.detail << "worst space-form relative gap=" << worst_eq << ", cubic relative gap=" << min_cubic_gap
           << ", curvature estimate >= A on " << estimates << " geometries";
  return o;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome suite_determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("warpconcave_acceptance_" + std::to_string(::getpid()));
  const auto configs = builtin_suite();
  double worst_time = 0.0;
  std::vector<SuiteEntry> runs[2];
  for (int k = 0; k < 2; ++k) {
    SuiteOptions opt;
    opt.out_dir = root / ("run" + std::to_string(k));
    opt.jobs = 2;
    const auto t0 = Clock::now();
    runs[k] = run_many(configs, opt);
    worst_time = std::max(worst_time, seconds_since(t0));
  }
  o.require(suite_exit_code(runs[0]) == 0, "suite exit code");
  o.require(suite_summary(runs[0]).dump() == suite_summary(runs[1]).dump(), "summary");
  std::size_t compared = 0, differing = 0;
  for (const auto& c : configs) {
    for (const auto& entry : fs::directory_iterator(root / "run0" / c.name)) {
      const fs::path other = root / "run1" / c.name / entry.path().filename();
      ++compared;
      if (!fs::exists(other) || file_bytes(entry.path()) != file_bytes(other)) {
        ++differing;
        o.require(false, c.name + "/" + entry.path().filename().string());
      }
    }
  }
  o.require(compared >= configs.size(), "files present");
  o.require(worst_time < 300.0, "runtime");
  o.detail << configs.size() << " scenarios, " << compared << " files compared, " << differing
           << " differ, slowest run=" << worst_time << "s";
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {"torsion exactness", torsion_exactness},
      {"eigenvalue anchors", eigenvalue_anchors},
      {"elliptic power concavity", elliptic_concavity},
      {"eigenfunction threshold", eigenfunction_threshold},
      {"heat flow log-concavity and onset", heat_flow_log_concavity},
      {"source steady state and onset", source_steady_state},
      {"heat kernel log-concavity", heat_kernel_checks},
      {"Cheng comparison and curvature estimate", cheng_and_curvature},
      {"suite determinism", suite_determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].name, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

#pragma once

// Radial reaction-diffusion v_t = v'' + (N-1)(log sigma)' v' + f(v) on a
// warped ball with v'(0, t) = v(R, t) = 0, by Crank-Nicolson in space-time.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "warpconcave/concavity_check.hpp"
#include "warpconcave/elliptic_radial.hpp"
#include "warpconcave/errors.hpp"
#include "warpconcave/radial_profile.hpp"
#include "warpconcave/warped_geometry.hpp"

namespace warpconcave {

/// Reaction term of problems (P), (P') and (P'').
class Nonlinearity {
 public:
  enum class Kind { absorption, power_absorption, power_source };

  /// u_t = Delta u - G(u).
  static Nonlinearity absorption(std::function<double(double)> G, std::string label = "G") {
    Nonlinearity n(Kind::absorption);
    n.G_ = std::move(G);
    n.label_ = std::move(label);
    return n;
  }
  /// u_t = Delta u - lambda u^nu, nu >= 1.
  static Nonlinearity power_absorption(double lambda, double nu) {
    if (!(lambda >= 0.0)) throw ContractViolation("absorption coefficient must be nonnegative");
    if (!(nu >= 1.0)) throw ContractViolation("absorption exponent nu must be >= 1");
    Nonlinearity n(Kind::power_absorption);
    n.lambda_ = lambda;
    n.exponent_ = nu;
    return n;
  }
  /// u_t = Delta u + lambda u^gamma, gamma in [0, 1].
  static Nonlinearity power_source(double lambda, double gamma) {
    if (!(lambda >= 0.0)) throw ContractViolation("source coefficient must be nonnegative");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractViolation("source exponent gamma must lie in [0, 1]");
    Nonlinearity n(Kind::power_source);
    n.lambda_ = lambda;
    n.exponent_ = gamma;
    return n;
  }
  /// Pure heat flow.
  static Nonlinearity heat() { return power_absorption(0.0, 1.0); }

  Kind kind() const noexcept { return kind_; }
  double lambda() const noexcept { return lambda_; }
  double exponent() const noexcept { return exponent_; }

  /// Right-hand side contribution f(v); negative v is clamped to 0.
  double operator()(double v) const {
    const double s = std::max(v, 0.0);
    switch (kind_) {
      case Kind::absorption:
        return -G_(s);
      case Kind::power_absorption:
        return lambda_ == 0.0 ? 0.0 : -lambda_ * std::pow(s, exponent_);
      case Kind::power_source:
        if (exponent_ == 0.0) return lambda_;
        return lambda_ * std::pow(s, exponent_);
    }
    return 0.0;
  }

  /// Absorption G(s) (zero for sources).
  double absorption_at(double s) const {
    switch (kind_) {
      case Kind::absorption:
        return G_(s);
      case Kind::power_absorption:
        return lambda_ == 0.0 ? 0.0 : lambda_ * std::pow(s, exponent_);
      case Kind::power_source:
        return 0.0;
    }
    return 0.0;
  }

  struct AbsorptionCheck {
    bool nonnegative;
    bool nondecreasing;
    bool convex;
    bool holds() const { return nonnegative && nondecreasing && convex; }
  };

  /// Samples s -> e^{-s} G(e^s) on s in [s_lo, s_hi] and checks that it is
  /// nonnegative, nondecreasing and convex (to a relative slack of 1e-12).
  AbsorptionCheck check_absorption(double s_lo = -20.0, double s_hi = 5.0, int n = 501) const {
    if (kind_ == Kind::power_source) return {true, true, true};
    std::vector<double> g(n);
    double scale = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = s_lo + (s_hi - s_lo) * i / (n - 1);
      g[i] = std::exp(-s) * absorption_at(std::exp(s));
      scale = std::max(scale, std::abs(g[i]));
    }
    const double slack = 1e-12 * std::max(scale, 1e-300);
    AbsorptionCheck c{true, true, true};
    for (int i = 0; i < n; ++i) {
      if (g[i] < -slack) c.nonnegative = false;
      if (i > 0 && g[i] < g[i - 1] - slack) c.nondecreasing = false;
      if (i > 0 && i + 1 < n && g[i + 1] - 2.0 * g[i] + g[i - 1] < -slack) c.convex = false;
    }
    return c;
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::absorption:
        return "absorption " + label_;
      case Kind::power_absorption:
        return "power_absorption";
      case Kind::power_source:
        return "power_source";
    }
    return "?";
  }

 private:
  explicit Nonlinearity(Kind k) : kind_(k) {}
  Kind kind_;
  double lambda_ = 0.0;
  double exponent_ = 1.0;
  std::function<double(double)> G_;
  std::string label_;
};

struct EvolutionState {
  double t;
  RadialProfile profile;
};

struct EvolveOptions {
  /// Implicit Euler half-steps replacing the first Crank-Nicolson steps
  /// (damps the high-frequency content of rough initial data).
  int rannacher_half_steps = 4;
  /// Repeat the implicit start-up after every recorded sample. Crank-Nicolson
  /// barely damps modes with |mu| dt >> 1, so roundoff left from early times
  /// would otherwise dominate a profile that has since decayed by many orders.
  bool restart_after_samples = true;
  /// dt is multiplied by this factor after every step, up to dt_max.
  double dt_growth = 1.0;
  double dt_max = std::numeric_limits<double>::infinity();
};

namespace detail {

// Tridiagonal radial operator L in conservative finite-volume form:
// (Lv)_i = [s_{i+1/2} (v_{i+1} - v_i) - s_{i-1/2} (v_i - v_{i-1})] / (h V_i)
// with s = sigma^{N-1} at the cell faces and V_i the cell volume
// int sigma^{N-1} over [r_i - h/2, r_i + h/2] (clipped to [0, R]). On a
// flat ball the pole row is exactly 2N(v_1 - v_0)/h^2. The Dirichlet row at
// r = R is removed (v_M = 0).
class RadialOperator {
 public:
  RadialOperator(const Ball& ball, const std::vector<double>& r) : n_(r.size() - 1) {
    const int N = ball.dimension();
    const double h = r[1] - r[0];
    const auto& sigma = ball.factor();
    auto face = [&](double x) { return std::pow(sigma(x).value, N - 1); };
    volume_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double a = i == 0 ? 0.0 : r[i] - 0.5 * h;
      volume_[i] = boost::math::quadrature::gauss<double, 7>::integrate(face, a, r[i] + 0.5 * h);
    }
    sub_.assign(n_, 0.0);
    diag_.assign(n_, 0.0);
    sup_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double right = face(r[i] + 0.5 * h) / (h * volume_[i]);
      const double left = i == 0 ? 0.0 : face(r[i] - 0.5 * h) / (h * volume_[i]);
      sub_[i] = left;
      sup_[i] = right;
      diag_[i] = -(left + right);
    }
  }

  /// Cell volumes (without the sphere area); sum V_i v_i is the conserved mass.
  const std::vector<double>& volumes() const { return volume_; }

  std::size_t unknowns() const { return n_; }

  // y = L x on the unknowns (x_n = 0 implied).
  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = diag_[i] * x[i];
      if (i > 0) acc += sub_[i] * x[i - 1];
      if (i + 1 < n_) acc += sup_[i] * x[i + 1];
      y[i] = acc;
    }
  }

  // Solves (I - c L) x = rhs in place by the Thomas algorithm.
  void solve_shifted(double c, std::vector<double>& rhs) const {
    std::vector<double>& d = rhs;
    scratch_.resize(n_);
    double b = 1.0 - c * diag_[0];
    scratch_[0] = -c * sup_[0] / b;
    d[0] /= b;
    for (std::size_t i = 1; i < n_; ++i) {
      const double a = -c * sub_[i];
      b = 1.0 - c * diag_[i] - a * scratch_[i - 1];
      scratch_[i] = (i + 1 < n_) ? -c * sup_[i] / b : 0.0;
      d[i] = (d[i] - a * d[i - 1]) / b;
    }
    for (std::size_t i = n_ - 1; i-- > 0;) d[i] -= scratch_[i] * d[i + 1];
  }

 private:
  std::size_t n_;
  std::vector<double> sub_, diag_, sup_, volume_;
  mutable std::vector<double> scratch_;
};

// Evolves the unknowns x (v_0..v_{M-1}) by one theta-step of size dt with a
// predictor-corrector treatment of the reaction term.
inline void theta_step(const RadialOperator& L, const Nonlinearity& f, std::vector<double>& x, double dt,
                       double theta, std::vector<double>& work, std::vector<double>& f0) {
  const std::size_t n = x.size();
  L.apply(x, work);
  for (std::size_t i = 0; i < n; ++i) f0[i] = f(x[i]);
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = x[i] + (1.0 - theta) * dt * work[i] + dt * f0[i];
  L.solve_shifted(theta * dt, rhs);
  // Corrector: trapezoidal average of the reaction at both ends of the step.
  for (std::size_t i = 0; i < n; ++i) {
    const double favg = 0.5 * (f0[i] + f(rhs[i]));
    rhs[i] = x[i] + (1.0 - theta) * dt * work[i] + dt * favg;
  }
  L.solve_shifted(theta * dt, rhs);
  x.swap(rhs);
}

inline std::vector<double> with_boundary(const std::vector<double>& x) {
  std::vector<double> v(x);
  v.push_back(0.0);
  return v;
}

}  // namespace detail

/// Area of the unit sphere S^{N-1}.
inline double unit_sphere_area(int N) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N);
}

/// Mass of a profile in the evolution's finite-volume measure,
/// omega_{N-1} sum_i V_i v_i. Conserved by pure heat flow up to boundary flux.
inline double discrete_mass(const Ball& ball, const RadialProfile& p) {
  const detail::RadialOperator L(ball, p.r);
  double m = 0.0;
  for (std::size_t i = 0; i < L.unknowns(); ++i) m += L.volumes()[i] * p.v[i];
  return unit_sphere_area(ball.dimension()) * m;
}

/// Evolves v_t = Lv + f(v) from `initial` and returns the states at the
/// requested sample times (sorted, in [0, t_end]).
///
/// Steps are shortened to land exactly on each sample time. Throws
/// StiffnessError when a step produces values below -1e-12 max|v|; the
/// caller should retry with a smaller dt.
inline std::vector<EvolutionState> evolve(const Ball& ball, const Nonlinearity& f, const RadialProfile& initial,
                                          double t_end, double dt, std::vector<double> sample_times,
                                          const EvolveOptions& opt = {}) {
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw ContractViolation("dt must be positive and t_end nonnegative");
  if (std::abs(initial.radius() - ball.radius()) > 1e-12 * ball.radius()) {
    throw ContractViolation("initial profile grid does not span the ball");
  }
  if (initial.v.back() != 0.0) throw ContractViolation("initial data must vanish at r = R");
  for (double v : initial.v) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ContractViolation("initial data must be finite and nonnegative");
  }
  std::sort(sample_times.begin(), sample_times.end());
  for (double s : sample_times) {
    if (s < 0.0 || s > t_end * (1.0 + 1e-12)) throw ContractViolation("sample times must lie in [0, t_end]");
  }

  const detail::RadialOperator L(ball, initial.r);
  std::vector<double> x(initial.v.begin(), initial.v.end() - 1);
  std::vector<double> work(x.size()), f0(x.size());
  std::vector<EvolutionState> out;
  out.reserve(sample_times.size());

  auto record = [&](double t) {
    EvolutionState s{t, profile_from_values(initial.r, detail::with_boundary(x), "evolution")};
    out.push_back(std::move(s));
  };

  double t = 0.0;
  double step = dt;
  int half_steps_left = opt.rannacher_half_steps;
  std::size_t next = 0;
  while (next < sample_times.size() && sample_times[next] <= 0.0) record(0.0), ++next;
  while (next < sample_times.size()) {
    const double target = sample_times[next];
    double h = std::min(step, target - t);
    const bool lands = h >= target - t;
    if (half_steps_left > 0) {
      detail::theta_step(L, f, x, 0.5 * h, 1.0, work, f0);
      detail::theta_step(L, f, x, 0.5 * h, 1.0, work, f0);
      half_steps_left -= 2;
    } else {
      detail::theta_step(L, f, x, h, 0.5, work, f0);
    }
    t = lands ? target : t + h;

    double vmax = 0.0, vmin = 0.0;
    for (double v : x) {
      if (!std::isfinite(v)) throw StiffnessError("non-finite value in evolution", t);
      vmax = std::max(vmax, std::abs(v));
      vmin = std::min(vmin, v);
    }
    if (vmin < -1e-12 * vmax) throw StiffnessError("positivity violated; halve dt", t);
    for (double& v : x) v = std::max(v, 0.0);

    if (!lands) step = std::min(step * opt.dt_growth, opt.dt_max);
    bool recorded = false;
    while (next < sample_times.size() && sample_times[next] <= t * (1.0 + 1e-15)) record(t), ++next, recorded = true;
    if (recorded && opt.restart_after_samples) half_steps_left = opt.rannacher_half_steps;
  }
  return out;
}

/// Geometric sample times t0 2^k up to t_end, plus the extra times given.
inline std::vector<double> geometric_sample_times(double t_end, double t0 = 1e-4, std::vector<double> extra = {}) {
  std::vector<double> times = std::move(extra);
  for (double t = t0; t < t_end; t *= 2.0) times.push_back(t);
  times.push_back(t_end);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

/// Evolves with dt halved on StiffnessError, up to `max_halvings` times.
inline std::vector<EvolutionState> evolve_adaptive(const Ball& ball, const Nonlinearity& f,
                                                   const RadialProfile& initial, double t_end, double dt,
                                                   const std::vector<double>& sample_times,
                                                   EvolveOptions opt = {}, int max_halvings = 12) {
  for (int k = 0;; ++k) {
    try {
      return evolve(ball, f, initial, t_end, dt, sample_times, opt);
    } catch (const StiffnessError&) {
      if (k >= max_halvings) throw;
      dt *= 0.5;
      opt.dt_max *= 0.5;
    }
  }
}

struct SteadyState {
  RadialProfile profile;
  double t_reached;
  double bvp_discrepancy;  ///< max |v - v_bvp| / max v_bvp
  bool cross_check_ok;     ///< discrepancy within 10 tol
};

/// Long-time limit of (P'') u_t = Delta u + lambda u^gamma.
///
/// Starts from zero data for gamma = 0. For gamma in (0, 1) zero is itself
/// stationary, so the flow starts from a small positive multiple of the
/// torsion profile instead. Stops once ||v(t+1) - v(t)|| <= tol ||v(t+1)||.
inline SteadyState steady_state(const Ball& ball, double lambda, double gamma, double tol = 1e-8,
                                std::size_t M = 4096, double t_max = 1e3) {
  if (!(lambda > 0.0)) throw ContractViolation("lambda must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ContractViolation("gamma must lie in [0, 1); gamma = 1 resonates with lambda1 unless lambda = lambda1");
  }
  const auto r = uniform_grid(ball.radius(), M);
  std::vector<double> v0(r.size(), 0.0);
  if (gamma > 0.0) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      v0[i] = 1e-3 * (ball.radius() * ball.radius() - r[i] * r[i]);
    }
    v0.back() = 0.0;
  }
  RadialProfile state = profile_from_values(r, v0, "P''");
  const Nonlinearity f = Nonlinearity::power_source(lambda, gamma);
  const double h = ball.radius() / static_cast<double>(M);
  const double dt = std::min(0.05, 10.0 * h);
  double t = 0.0;
  bool converged = false;
  while (t < t_max) {
    EvolveOptions opt;
    opt.rannacher_half_steps = t == 0.0 ? 4 : 0;
    const auto states = evolve_adaptive(ball, f, state, 1.0, dt, {1.0}, opt);
    const RadialProfile& next = states.back().profile;
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < next.v.size(); ++i) {
      diff = std::max(diff, std::abs(next.v[i] - state.v[i]));
      norm = std::max(norm, std::abs(next.v[i]));
    }
    state = next;
    t += 1.0;
    if (norm > 0.0 && diff <= tol * norm) {
      converged = true;
      break;
    }
  }
  if (!converged) throw SolverFailure("steady state not reached within t_max");
  state.problem = "steady_state";

  const RadialProfile bvp = solve_power_bvp(ball, lambda, gamma, 1e-8, M);
  double disc = 0.0;
  for (std::size_t i = 0; i < bvp.v.size(); ++i) disc = std::max(disc, std::abs(state.v[i] - bvp.v[i]));
  disc /= bvp.max_value();
  return {std::move(state), t, disc, disc <= 10.0 * tol};
}

/// Earliest sampled time T such that certify_radial is strict at every
/// sampled time >= T, or empty if the last sample is not certified.
/// Samples whose interior values are not positive count as not certified.
inline std::optional<double> concavity_onset_time(const std::vector<EvolutionState>& states, const Ball& ball,
                                                  double alpha, double margin = -1.0, double delta = -1.0) {
  std::optional<double> onset;
  for (const auto& s : states) {
    bool strict = false;
    try {
      strict = certify_radial(s.profile, ball, alpha, delta, margin).verdict == Verdict::certified_strict;
    } catch (const DomainError&) {
      strict = false;
    }
    if (!strict) {
      onset.reset();
    } else if (!onset) {
      onset = s.t;
    }
  }
  return onset;
}

}  // namespace warpconcave

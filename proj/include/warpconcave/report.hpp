#pragma once

// Scenario pipeline (conditions, solve, certify, thresholds, bundle) and
// report emission as CSV profiles, a JSON report and optional SVG plots.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "warpconcave/appendix_bounds.hpp"
#include "warpconcave/concavity_check.hpp"
#include "warpconcave/elliptic_radial.hpp"
#include "warpconcave/heat_kernel.hpp"
#include "warpconcave/parabolic_radial.hpp"
#include "warpconcave/power_means.hpp"
#include "warpconcave/scenario.hpp"

namespace warpconcave {

enum class Stage { conditions, solve, certify, thresholds, bundle, emit };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::conditions:
      return "conditions";
    case Stage::solve:
      return "solve";
    case Stage::certify:
      return "certify";
    case Stage::thresholds:
      return "thresholds";
    case Stage::bundle:
      return "bundle";
    case Stage::emit:
      return "emit";
  }
  return "?";
}

/// Failure inside one pipeline stage; `type` names the original exception class.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, std::string type, const std::string& message)
      : std::runtime_error(to_string(stage) + ": " + message), stage_(stage), type_(std::move(type)),
        message_(message) {}
  Stage stage() const noexcept { return stage_; }
  const std::string& type() const noexcept { return type_; }
  const std::string& message() const noexcept { return message_; }

  nlohmann::ordered_json to_json() const {
    return {{"stage", to_string(stage_)}, {"type", type_}, {"message", message_}};
  }

 private:
  Stage stage_;
  std::string type_;
  std::string message_;
};

namespace detail {

template <class F>
auto run_stage(Stage stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(stage, "ConfigError", e.what());
  } catch (const StiffnessError& e) {
    throw StageError(stage, "StiffnessError", e.what());
  } catch (const BracketFailure& e) {
    throw StageError(stage, "BracketFailure", e.what());
  } catch (const SolverFailure& e) {
    throw StageError(stage, "SolverFailure", e.what());
  } catch (const DomainError& e) {
    throw StageError(stage, "DomainError", e.what());
  } catch (const ContractViolation& e) {
    throw StageError(stage, "ContractViolation", e.what());
  } catch (const Unsupported& e) {
    throw StageError(stage, "Unsupported", e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, "Error", e.what());
  }
}

}  // namespace detail

// --------------------------------------------------------------------------
// Bundle types
// --------------------------------------------------------------------------

struct ConditionEntry {
  ConditionReport report;
  std::optional<double> alpha;
  std::optional<double> lambda1;
};

/// Profile together with the time it was sampled at (NaN for stationary problems).
struct ProfileRecord {
  std::string label;
  double t = std::numeric_limits<double>::quiet_NaN();
  RadialProfile profile;
};

struct CertificateRecord {
  std::string id;
  std::string subject;
  double t = std::numeric_limits<double>::quiet_NaN();
  std::string note;
  ConcavityCertificate cert;
};

/// Requested verdict for one alpha. Evolutions are judged by the onset time:
/// certified when every sample from some time on is strictly certified.
struct AlphaVerdict {
  double alpha;
  Verdict verdict;
  std::string basis;  ///< "certificate", "all_times" or "onset"
  std::optional<double> onset_time;
};

struct TagResult {
  std::string tag;
  std::string status;  ///< a verdict name, "not_applicable" or "not_evaluated"
  std::string note;
};

inline const std::vector<std::string>& theorem_tags() {
  static const std::vector<std::string> tags{"T1.1", "T1.2", "T1.3", "T3.1", "C1.1", "C1.2",
                                             "C1.3", "C4.1", "CA.1", "CA.2", "PA.2"};
  return tags;
}

struct ReportBundle {
  ScenarioConfig config;
  std::string hash;
  std::vector<Stage> stages_run;
  std::vector<ConditionEntry> conditions;
  std::optional<Nonlinearity::AbsorptionCheck> absorption;
  nlohmann::ordered_json solve = nlohmann::ordered_json::object();
  std::vector<ProfileRecord> profiles;
  bool evolution = false;
  std::vector<double> alphas;
  std::vector<CertificateRecord> certificates;
  std::vector<AlphaVerdict> verdicts;
  std::optional<CurvatureBounds> curvature;
  std::optional<ThresholdReport> threshold;
  std::optional<ChengReport> cheng;
  std::string cheng_note;
  std::optional<double> small_ball;
  std::vector<TagResult> tags;

  const TagResult* tag(const std::string& name) const {
    for (const auto& t : tags) {
      if (t.tag == name) return &t;
    }
    return nullptr;
  }

  /// 0 when every requested verdict is certified, 2 when any is violated.
  int exit_code() const {
    for (const auto& v : verdicts) {
      if (v.verdict == Verdict::violated) return 2;
    }
    for (const auto& t : tags) {
      if (t.status == "violated") return 2;
    }
    return 0;
  }
};

struct RunOptions {
  Stage last = Stage::bundle;
  bool skip_certify = false;
  std::optional<RadialProfile> profile_override;  ///< certify a given profile instead of solving
};

// --------------------------------------------------------------------------
// Pipeline
// --------------------------------------------------------------------------

namespace detail {

inline bool same_alpha(double a, double b) { return std::abs(a - b) <= 1e-12; }

inline bool has_alpha(const std::vector<double>& alphas, double a) {
  return std::any_of(alphas.begin(), alphas.end(), [a](double x) { return same_alpha(x, a); });
}

inline const ConditionEntry* find_condition(const ReportBundle& b, ConditionId id,
                                            std::optional<double> alpha = std::nullopt) {
  for (const auto& c : b.conditions) {
    if (c.report.id != id) continue;
    if (alpha && !(c.alpha && same_alpha(*c.alpha, *alpha))) continue;
    return &c;
  }
  return nullptr;
}

inline bool condition_holds(const ReportBundle& b, ConditionId id, std::optional<double> alpha = std::nullopt) {
  const auto* c = find_condition(b, id, alpha);
  if (!c) return false;
  if (c->report.holds) return true;
  // Eq12 at alpha = A is an equality at the infimum point; accept rounding.
  if (id == ConditionId::eq12 && c->alpha && c->lambda1) {
    const double shift = *c->alpha * *c->lambda1 / (b.config.geometry.N - 1);
    return c->report.worst_margin <= 1e-12 * shift;
  }
  return false;
}

inline RadialProfile initial_profile(const ScenarioConfig& c, const Ball& ball) {
  const auto& spec = c.problem.initial;
  const std::size_t M = c.grid_size();
  const double R = c.geometry.R;
  if (spec.kind == "eigen") {
    auto eig = first_eigenpair(ball, c.solver.tol, M);
    eig.profile.v.back() = 0.0;
    return profile_from_values(eig.profile.r, eig.profile.v, "initial");
  }
  const auto r = uniform_grid(R, M);
  std::vector<double> v(r.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double x = r[i] / R;
    if (spec.kind == "bump") {
      v[i] = std::pow(std::max(0.0, 1.0 - x * x), spec.power);
    } else if (spec.kind == "ring") {
      const double y = (x - spec.center) / spec.width;
      v[i] = std::abs(y) < 1.0 ? std::pow(1.0 - y * y, 3) : 0.0;
    }
  }
  v.back() = 0.0;
  return profile_from_values(r, v, "initial");
}

inline Nonlinearity make_nonlinearity(const NonlinearitySpec& f) {
  if (f.kind == "power_absorption") return Nonlinearity::power_absorption(f.lambda, f.exponent);
  if (f.kind == "power_source") return Nonlinearity::power_source(f.lambda, f.exponent);
  return Nonlinearity::heat();
}

inline std::vector<double> default_alphas(const ScenarioConfig& c, const ReportBundle& b) {
  switch (c.problem.kind) {
    case ProblemKind::elliptic:
      return {1.0 - c.problem.gamma};
    case ProblemKind::eigen:
      if (b.threshold && b.threshold->admissible() && b.threshold->A < 1.0) return {0.0, b.threshold->A};
      return {0.0};
    case ProblemKind::parabolic:
      if (c.problem.nonlinearity.kind == "power_source") return {1.0 - c.problem.nonlinearity.exponent};
      return {0.0};
    case ProblemKind::heat_kernel:
      return {0.0};
  }
  return {};
}

inline std::string alpha_label(double a) {
  std::ostringstream os;
  os.precision(17);
  os << a;
  return os.str();
}

inline double kernel_cutoff(const KernelSpec& s) {
  return 10.0 + 6.0 * (s.N - 1) * std::sqrt(-s.K) * s.t + 12.0 * std::sqrt(s.t);
}

inline void run_conditions(ReportBundle& b, const Ball& ball) {
  const auto& c = b.config;
  b.conditions.push_back({check_condition(ball, ConditionId::c2_necessary), std::nullopt, std::nullopt});
  auto eq11 = [&](double a) {
    if (!find_condition(b, ConditionId::eq11, a)) {
      b.conditions.push_back({check_condition(ball, ConditionId::eq11, a), a, std::nullopt});
    }
  };
  switch (c.problem.kind) {
    case ProblemKind::elliptic:
      eq11(1.0 - c.problem.gamma);
      for (double a : c.alphas) eq11(a);
      break;
    case ProblemKind::eigen:
      eq11(0.0);
      break;
    case ProblemKind::parabolic: {
      b.conditions.push_back({check_condition(ball, ConditionId::eq13), std::nullopt, std::nullopt});
      const auto& f = c.problem.nonlinearity;
      eq11(f.kind == "power_source" ? 1.0 - f.exponent : 0.0);
      for (double a : c.alphas) eq11(a);
      if (f.kind != "power_source") b.absorption = make_nonlinearity(f).check_absorption();
      break;
    }
    case ProblemKind::heat_kernel:
      break;
  }
}

inline void run_solve(ReportBundle& b, const Ball& ball, const RunOptions& opt) {
  const auto& c = b.config;
  const std::size_t M = c.grid_size();
  auto& s = b.solve;
  if (opt.profile_override) {
    if (c.problem.kind == ProblemKind::parabolic || c.problem.kind == ProblemKind::heat_kernel) {
      throw ContractViolation("a profile file can only be certified for elliptic or eigen scenarios");
    }
    s["source"] = "profile_file";
    b.profiles.push_back({"profile", std::numeric_limits<double>::quiet_NaN(), *opt.profile_override});
    if (c.problem.kind == ProblemKind::eigen) s["lambda1"] = first_eigenpair(ball, c.solver.tol, M).lambda1;
    return;
  }
  switch (c.problem.kind) {
    case ProblemKind::elliptic: {
      auto p = solve_power_bvp(ball, c.problem.lambda, c.problem.gamma, c.solver.tol, M);
      s["shooting_parameter"] = p.shooting_parameter;
      s["residual"] = p.residual;
      s["max_value"] = p.max_value();
      b.profiles.push_back({"solution", std::numeric_limits<double>::quiet_NaN(), std::move(p)});
      break;
    }
    case ProblemKind::eigen: {
      auto e = first_eigenpair(ball, c.solver.tol, M);
      s["lambda1"] = e.lambda1;
      s["rayleigh_quotient"] = e.rayleigh;
      s["residual"] = e.profile.residual;
      b.profiles.push_back({"eigenfunction", std::numeric_limits<double>::quiet_NaN(), std::move(e.profile)});
      break;
    }
    case ProblemKind::parabolic: {
      b.evolution = true;
      const RadialProfile init = initial_profile(c, ball);
      const Nonlinearity f = make_nonlinearity(c.problem.nonlinearity);
      const auto times =
          c.problem.times.empty() ? geometric_sample_times(c.problem.t_end, c.problem.t_first) : c.problem.times;
      EvolveOptions eo;
      eo.dt_growth = c.solver.dt_growth;
      eo.dt_max = c.solver.dt_max;
      const auto states = evolve_adaptive(ball, f, init, c.problem.t_end, c.solver.dt, times, eo);
      s["nonlinearity"] = f.describe();
      s["samples"] = states.size();
      s["initial_mass"] = discrete_mass(ball, init);
      s["final_mass"] = discrete_mass(ball, states.back().profile);
      b.profiles.push_back({"initial", 0.0, init});
      for (const auto& st : states) b.profiles.push_back({"sample", st.t, st.profile});
      if (c.problem.steady_state) {
        const auto ss = steady_state(ball, c.problem.nonlinearity.lambda, c.problem.nonlinearity.exponent,
                                     c.solver.tol, M);
        s["steady_state"] = {{"t_reached", ss.t_reached},
                             {"bvp_discrepancy", ss.bvp_discrepancy},
                             {"cross_check_ok", ss.cross_check_ok}};
      }
      break;
    }
    case ProblemKind::heat_kernel: {
      b.evolution = true;
      const int N = c.geometry.N;
      const double K = c.geometry.K;
      nlohmann::ordered_json masses = nlohmann::ordered_json::array();
      for (double t : c.problem.times) {
        const KernelSpec spec{N, K, t};
        const auto r = uniform_grid(c.geometry.R, M);
        std::vector<double> v(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) v[i] = kernel_value(spec, r[i]);
        b.profiles.push_back({"kernel", t, profile_from_values(r, v, "heat_kernel")});
        masses.push_back({{"t", t}, {"mass", kernel_mass(spec, kernel_cutoff(spec))}});
      }
      s["masses"] = masses;
      if (c.problem.delta_check) {
        const auto states = delta_approximation(N, K, c.problem.times);
        nlohmann::ordered_json checks = nlohmann::ordered_json::array();
        for (const auto& st : states) {
          double err = 0.0;
          for (std::size_t i = 0; i < st.profile.r.size() && st.profile.r[i] <= 3.0; ++i) {
            const double ref = kernel_value({N, K, st.t}, st.profile.r[i]);
            err = std::max(err, std::abs(st.profile.v[i] - ref) / ref);
          }
          checks.push_back({{"t", st.t}, {"max_relative_error", err}, {"within_1e-3", err <= 1e-3}});
        }
        s["delta_check"] = checks;
      }
      break;
    }
  }
}

inline void run_thresholds(ReportBundle& b, const Ball& ball) {
  const auto& c = b.config;
  if (b.curvature) return;
  b.curvature = curvature_bounds(ball);
  if (c.problem.kind != ProblemKind::eigen) return;
  const double lambda1 = b.solve.at("lambda1").get<double>();
  b.threshold = alpha_threshold(ball, lambda1);
  b.small_ball = small_ball_threshold(c.geometry.N);
  try {
    b.cheng = cheng_check(ball, c.solver.tol, c.grid_size());
  } catch (const Unsupported& e) {
    b.cheng_note = e.what();
  }
}

inline void add_eq12(ReportBundle& b, const Ball& ball) {
  if (b.config.problem.kind != ProblemKind::eigen) return;
  const double lambda1 = b.solve.at("lambda1").get<double>();
  for (double a : b.alphas) {
    if (a > 0.0 && a < 1.0 && !find_condition(b, ConditionId::eq12, a)) {
      b.conditions.push_back({check_condition(ball, ConditionId::eq12, a, lambda1), a, lambda1});
    }
  }
}

inline GeodesicSamplingOptions sampling(const CertificationSpec& q) {
  GeodesicSamplingOptions o;
  o.n_pairs = q.n_pairs;
  o.n_params = q.n_params;
  o.seed = q.seed;
  if (q.eps >= 0.0) o.eps = q.eps;
  return o;
}

inline void run_certify(ReportBundle& b, const Ball& ball) {
  const auto& c = b.config;
  const auto& q = c.certification;
  const auto geo = sampling(q);
  switch (c.problem.kind) {
    case ProblemKind::elliptic:
    case ProblemKind::eigen: {
      const auto& p = b.profiles.front();
      for (double a : b.alphas) {
        CertificateRecord rec;
        rec.id = p.label + "@alpha=" + alpha_label(a);
        rec.subject = p.label;
        rec.cert = q.geodesic ? certify_both(p.profile, ball, a, geo, q.delta, q.eps)
                              : certify_radial(p.profile, ball, a, q.delta, q.eps);
        b.verdicts.push_back({a, rec.cert.verdict, "certificate", std::nullopt});
        b.certificates.push_back(std::move(rec));
      }
      break;
    }
    case ProblemKind::parabolic: {
      for (double a : b.alphas) {
        std::optional<double> onset;
        bool all_positive_times = true;
        for (std::size_t k = 0; k < b.profiles.size(); ++k) {
          const auto& p = b.profiles[k];
          CertificateRecord rec;
          rec.id = (k == 0 ? std::string("initial") : "t=" + alpha_label(p.t)) + "@alpha=" + alpha_label(a);
          rec.subject = p.label;
          rec.t = p.t;
          const bool last = k + 1 == b.profiles.size();
          try {
            rec.cert = last && q.geodesic ? certify_both(p.profile, ball, a, geo, q.delta, q.eps)
                                          : certify_radial(p.profile, ball, a, q.delta, q.eps);
          } catch (const DomainError& e) {
            rec.cert.alpha = a;
            rec.cert.verdict = Verdict::violated;
            rec.note = std::string("not certifiable: ") + e.what();
          }
          if (k > 0) {
            const bool strict = rec.cert.verdict == Verdict::certified_strict;
            if (!strict) {
              onset.reset();
              all_positive_times = false;
            } else if (!onset) {
              onset = p.t;
            }
          }
          b.certificates.push_back(std::move(rec));
        }
        AlphaVerdict v{a, onset ? Verdict::certified_strict : Verdict::violated, "onset", onset};
        if (all_positive_times) v.basis = "all_times";
        b.verdicts.push_back(v);
      }
      break;
    }
    case ProblemKind::heat_kernel: {
      KernelConcavityOptions ko;
      ko.radial_points = c.grid_size();
      ko.n_pairs = q.n_pairs;
      ko.n_params = q.n_params;
      ko.seed = q.seed;
      if (q.eps >= 0.0) ko.eps = q.eps;
      Verdict all = Verdict::certified_strict;
      for (double t : c.problem.times) {
        CertificateRecord rec;
        rec.id = "kernel@t=" + alpha_label(t);
        rec.subject = "kernel";
        rec.t = t;
        rec.cert = kernel_log_concavity({c.geometry.N, c.geometry.K, t}, c.geometry.R, ko);
        all = combine(all, rec.cert.verdict);
        b.certificates.push_back(std::move(rec));
      }
      b.verdicts.push_back({0.0, all, "certificate", std::nullopt});
      break;
    }
  }
}

inline const AlphaVerdict* find_verdict(const ReportBundle& b, double a) {
  for (const auto& v : b.verdicts) {
    if (same_alpha(v.alpha, a)) return &v;
  }
  return nullptr;
}

inline const CertificateRecord* initial_certificate(const ReportBundle& b, double a) {
  for (const auto& r : b.certificates) {
    if (r.t == 0.0 && same_alpha(r.cert.alpha, a)) return &r;
  }
  return nullptr;
}

/// Combined verdict over the alphas accepted by `pred`, or nullopt if none is.
template <class Pred>
std::optional<Verdict> combined(const ReportBundle& b, Pred pred) {
  std::optional<Verdict> out;
  for (const auto& v : b.verdicts) {
    if (!pred(v.alpha)) continue;
    out = out ? combine(*out, v.verdict) : v.verdict;
  }
  return out;
}

inline void run_bundle(ReportBundle& b) {
  const auto& c = b.config;
  std::map<std::string, TagResult> tags;
  for (const auto& t : theorem_tags()) tags[t] = {t, "not_evaluated", ""};
  auto set = [&](const std::string& tag, std::optional<Verdict> v, const std::string& note) {
    tags[tag] = {tag, v ? to_string(*v) : "not_applicable", v ? note : "hypotheses not met: " + note};
  };
  const bool c2 = condition_holds(b, ConditionId::c2_necessary);

  switch (c.problem.kind) {
    case ProblemKind::elliptic: {
      const double g = c.problem.gamma;
      auto t11 = [&](double a) { return c2 && a <= 1.0 - g + 1e-12 && condition_holds(b, ConditionId::eq11, a); };
      set("T1.1", combined(b, t11), "alphas with s^(alpha-1) F(s) nonincreasing and Eq11");
      set("C1.1", combined(b, [&](double a) { return same_alpha(a, 1.0 - g) && t11(a); }),
          "alpha = 1 - gamma with Eq11");
      break;
    }
    case ProblemKind::eigen: {
      const bool eq11_0 = c2 && condition_holds(b, ConditionId::eq11, 0.0);
      auto at_zero = [&](double a) { return eq11_0 && a == 0.0; };
      set("T1.1", combined(b, at_zero), "F(s) = lambda1 s at alpha = 0 with Eq11");
      set("C1.1", combined(b, at_zero), "gamma = 1, alpha = 0 with Eq11");
      set("T1.2", combined(b, [&](double a) {
            return c2 && a > 0.0 && a < 1.0 && condition_holds(b, ConditionId::eq12, a);
          }),
          "alpha in (0, 1) with Eq12");
      if (b.threshold) {
        const double A = b.threshold->A;
        const auto& g = c.geometry;
        const bool in_rK = g.factor == "space_form" && (g.K <= 0.0 || g.R <= convexity_radius_space_form(g.K));
        set("CA.1", combined(b, [&](double a) { return in_rK && a > 0.0 && a < 1.0 && a <= A * (1.0 + 1e-12); }),
            "space form ball with alpha <= A(sigma_K, R, N)");
        const double limit = *b.small_ball;
        set("CA.2", combined(b, [&](double a) {
              return c2 && a > 0.0 && a < limit && a <= A * (1.0 + 1e-12);
            }),
            "alpha below (N-1)/j^2 and A(sigma, R, N)");
      }
      if (b.cheng) {
        const Verdict v = !b.cheng->holds ? Verdict::violated
                          : b.cheng->relative_gap > 1e-6 ? Verdict::certified_strict
                                                         : Verdict::certified_weak;
        set("PA.2", v, "relative gap " + alpha_label(b.cheng->relative_gap));
      } else if (!b.cheng_note.empty()) {
        set("PA.2", std::nullopt, b.cheng_note);
      }
      break;
    }
    case ProblemKind::parabolic: {
      const auto& f = c.problem.nonlinearity;
      if (f.kind == "power_source") {
        const double a = 1.0 - f.exponent;
        const bool hyp = c2 && condition_holds(b, ConditionId::eq11, a);
        const auto* v = find_verdict(b, a);
        set("T3.1", hyp && v ? std::optional<Verdict>(v->verdict) : std::nullopt,
            "onset of (1 - gamma)-concavity with Eq11");
        break;
      }
      const auto* v0 = find_verdict(b, 0.0);
      if (!v0) break;
      const auto* init = initial_certificate(b, 0.0);
      const bool log_concave_data = init && init->cert.verdict != Verdict::violated;
      const bool eq13 = c2 && condition_holds(b, ConditionId::eq13);
      const bool absorbing = b.absorption && b.absorption->holds();
      const std::optional<Verdict> preserved =
          v0->basis == "all_times" ? Verdict::certified_strict : Verdict::violated;
      const bool t13 = eq13 && absorbing && log_concave_data;
      set("T1.3", t13 ? preserved : std::nullopt, "Eq13, absorption condition and log-concave data");
      set("C1.2", t13 ? preserved : std::nullopt, "power absorption with Eq13 and log-concave data");
      if (f.kind == "heat") {
        if (t13) {
          set("C4.1", preserved, "(iii) log-concave data with Eq13");
        } else {
          const bool eq11_0 = c2 && condition_holds(b, ConditionId::eq11, 0.0);
          set("C4.1", eq11_0 ? std::optional<Verdict>(v0->verdict) : std::nullopt,
              "(i) log-concavity onset with Eq11 at alpha = 0");
        }
      }
      break;
    }
    case ProblemKind::heat_kernel:
      set("C1.3", combined(b, [](double) { return true; }), "log-concavity of the heat kernel");
      break;
  }
  b.tags.clear();
  for (const auto& t : theorem_tags()) b.tags.push_back(tags[t]);
}

}  // namespace detail

/// Runs the pipeline up to `opt.last`; any failure aborts with a StageError.
inline ReportBundle run_scenario(const ScenarioConfig& config, const RunOptions& opt = {}) {
  ReportBundle b;
  detail::run_stage(Stage::conditions, [&] { validate(config); });
  b.config = config;
  b.hash = scenario_hash(config);
  const Ball ball = detail::run_stage(Stage::conditions, [&] { return config.geometry.make_ball(); });

  auto reached = [&](Stage s) { return static_cast<int>(s) <= static_cast<int>(opt.last); };
  detail::run_stage(Stage::conditions, [&] { detail::run_conditions(b, ball); });
  b.stages_run.push_back(Stage::conditions);
  if (!reached(Stage::solve)) return b;

  detail::run_stage(Stage::solve, [&] { detail::run_solve(b, ball, opt); });
  b.stages_run.push_back(Stage::solve);
  if (config.problem.kind == ProblemKind::eigen) {
    // The automatic alpha for the eigenfunction is the threshold A.
    detail::run_stage(Stage::thresholds, [&] { detail::run_thresholds(b, ball); });
  }
  b.alphas = config.auto_alpha ? detail::default_alphas(config, b) : config.alphas;
  detail::run_stage(Stage::thresholds, [&] { detail::add_eq12(b, ball); });
  if (reached(Stage::certify) && !opt.skip_certify) {
    detail::run_stage(Stage::certify, [&] { detail::run_certify(b, ball); });
    b.stages_run.push_back(Stage::certify);
  }
  if (!reached(Stage::thresholds)) return b;

  detail::run_stage(Stage::thresholds, [&] { detail::run_thresholds(b, ball); });
  b.stages_run.push_back(Stage::thresholds);
  if (!reached(Stage::bundle)) return b;

  detail::run_stage(Stage::bundle, [&] { detail::run_bundle(b); });
  b.stages_run.push_back(Stage::bundle);
  return b;
}

// --------------------------------------------------------------------------
// JSON
// --------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

inline nlohmann::ordered_json to_json(const ConcavityCertificate& c, bool with_samples) {
  nlohmann::ordered_json j;
  j["alpha"] = c.alpha;
  j["method"] = to_string(c.method);
  j["verdict"] = to_string(c.verdict);
  j["boundary_cut"] = c.boundary_cut;
  j["epsilon"] = c.epsilon;
  j["max_w1"] = number(c.max_w1);
  j["max_w1_radius"] = c.max_w1_radius;
  j["max_w2"] = number(c.max_w2);
  j["max_w2_radius"] = c.max_w2_radius;
  if (c.method != CertificateMethod::radial) {
    nlohmann::ordered_json g;
    g["n_samples"] = c.geodesic_results.size();
    g["skipped_near_pole"] = c.skipped_near_pole;
    g["min_gap"] = number(c.min_gap);
    g["interpolation_error"] = c.interpolation_error;
    if (with_samples) {
      // [p.radius, p.angle, q.radius, q.angle, t, lhs, rhs, gap]
      auto s = nlohmann::ordered_json::array();
      for (const auto& r : c.geodesic_results) {
        s.push_back({r.p.radius, r.p.angle, r.q.radius, r.q.angle, r.t, number(r.lhs), number(r.rhs),
                     number(r.gap)});
      }
      g["samples"] = std::move(s);
    }
    j["geodesic"] = std::move(g);
  }
  return j;
}

inline nlohmann::ordered_json to_json(const CurvatureBounds& c) {
  return {{"K_min", c.K_min}, {"K_min_radius", c.K_min_radius}, {"K_max", c.K_max}, {"K_max_radius", c.K_max_radius}};
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ReportBundle& b, const std::vector<std::string>& files = {}) {
  using detail::number;
  nlohmann::ordered_json j;
  j["format"] = "warpconcave-report";
  j["format_version"] = 1;
  j["scenario"] = {{"name", b.config.name}, {"hash", b.hash}, {"config", canonical_json(b.config)}};
  auto stages = nlohmann::ordered_json::array();
  for (Stage s : b.stages_run) stages.push_back(to_string(s));
  j["stages"] = stages;

  auto conds = nlohmann::ordered_json::array();
  for (const auto& c : b.conditions) {
    nlohmann::ordered_json e;
    e["id"] = to_string(c.report.id);
    e["holds"] = c.report.holds;
    e["worst_margin"] = number(c.report.worst_margin);
    e["worst_radius"] = c.report.worst_radius;
    if (c.alpha) e["alpha"] = *c.alpha;
    if (c.lambda1) e["lambda1"] = *c.lambda1;
    conds.push_back(std::move(e));
  }
  j["conditions"] = conds;
  if (b.absorption) {
    j["absorption"] = {{"nonnegative", b.absorption->nonnegative},
                       {"nondecreasing", b.absorption->nondecreasing},
                       {"convex", b.absorption->convex},
                       {"holds", b.absorption->holds()}};
  }
  j["solve"] = b.solve;
  j["alphas"] = b.alphas;

  auto certs = nlohmann::ordered_json::array();
  for (const auto& r : b.certificates) {
    nlohmann::ordered_json e;
    e["id"] = r.id;
    e["scenario_hash"] = b.hash;
    e["subject"] = r.subject;
    e["t"] = number(r.t);
    if (!r.note.empty()) e["note"] = r.note;
    e.update(detail::to_json(r.cert, true));
    certs.push_back(std::move(e));
  }
  j["certificates"] = certs;

  auto verdicts = nlohmann::ordered_json::array();
  for (const auto& v : b.verdicts) {
    verdicts.push_back({{"alpha", v.alpha},
                        {"verdict", to_string(v.verdict)},
                        {"basis", v.basis},
                        {"onset_time", v.onset_time ? nlohmann::ordered_json(*v.onset_time) : nullptr}});
  }
  j["verdicts"] = verdicts;

  nlohmann::ordered_json th = nlohmann::ordered_json::object();
  if (b.curvature) th["curvature"] = detail::to_json(*b.curvature);
  if (b.threshold) {
    const auto& t = *b.threshold;
    th["alpha_threshold"] = {{"A", t.A},
                             {"lambda1", t.lambda1_used},
                             {"inf_point", t.inf_point},
                             {"admissible", t.admissible()},
                             {"lambda1_model", number(t.lambda1_model)},
                             {"curvature_estimate", number(t.curvature_estimate)},
                             {"cheng_ok", t.cheng_ok ? nlohmann::ordered_json(*t.cheng_ok) : nullptr}};
  }
  if (b.cheng) {
    th["cheng"] = {{"holds", b.cheng->holds},
                   {"lambda_ball", b.cheng->lambda_ball},
                   {"lambda_model", b.cheng->lambda_model},
                   {"K_max", b.cheng->K_max},
                   {"relative_gap", b.cheng->relative_gap}};
  } else if (!b.cheng_note.empty()) {
    th["cheng"] = {{"unsupported", b.cheng_note}};
  }
  if (b.small_ball) th["small_ball_threshold"] = *b.small_ball;
  j["thresholds"] = th;

  nlohmann::ordered_json tags = nlohmann::ordered_json::object();
  for (const auto& t : b.tags) tags[t.tag] = {{"status", t.status}, {"note", t.note}};
  j["tags"] = tags;
  j["files"] = files;
  j["exit_code"] = b.exit_code();
  return j;
}

// --------------------------------------------------------------------------
// CSV
// --------------------------------------------------------------------------

namespace detail {

inline void put(std::string& out, double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

struct WColumns {
  std::vector<double> w, w1, w2;
};

/// w = L_{1-alpha}(v) and its central differences wherever they are defined;
/// NaN elsewhere. Matches w_transform on positive data.
inline WColumns w_columns(const RadialProfile& p, double alpha) {
  const QIndex q = QIndex::from_alpha(alpha);
  const std::size_t n = p.r.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  WColumns c{std::vector<double>(n, nan), std::vector<double>(n, nan), std::vector<double>(n, nan)};
  for (std::size_t i = 0; i < n; ++i) {
    if (p.v[i] > 0.0) c.w[i] = q_log(q, p.v[i]);
  }
  const double h = p.step();
  if (std::isfinite(c.w[0]) && std::isfinite(c.w[1])) {
    c.w1[0] = 0.0;
    c.w2[0] = 2.0 * (c.w[1] - c.w[0]) / (h * h);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(std::isfinite(c.w[i - 1]) && std::isfinite(c.w[i]) && std::isfinite(c.w[i + 1]))) continue;
    c.w1[i] = (c.w[i + 1] - c.w[i - 1]) / (2.0 * h);
    c.w2[i] = (c.w[i + 1] - 2.0 * c.w[i] + c.w[i - 1]) / (h * h);
  }
  return c;
}

}  // namespace detail

/// CSV text with columns [t,] r, v, w, w1, w2 in shortest round-trip form.
inline std::string profiles_csv(const std::vector<ProfileRecord>& profiles, double alpha, bool with_time) {
  std::string out = with_time ? "t,r,v,w,w1,w2\n" : "r,v,w,w1,w2\n";
  for (const auto& rec : profiles) {
    const auto& p = rec.profile;
    const auto c = detail::w_columns(p, alpha);
    for (std::size_t i = 0; i < p.r.size(); ++i) {
      if (with_time) {
        detail::put(out, rec.t);
        out += ',';
      }
      for (double x : {p.r[i], p.v[i], c.w[i], c.w1[i], c.w2[i]}) {
        detail::put(out, x);
        out += ',';
      }
      out.back() = '\n';
    }
  }
  return out;
}

/// Parsed CSV table: header names and row-major values.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ContractViolation("CSV has no column '" + name + "'");
    const std::size_t k = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[k]);
    return out;
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ContractViolation("empty CSV");
  std::istringstream header(line);
  for (std::string name; std::getline(header, name, ',');) t.columns.push_back(name);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      double x = 0.0;
      const auto res = std::from_chars(p, end, x);
      if (res.ec != std::errc()) throw ContractViolation("bad number on CSV line " + std::to_string(lineno));
      row.push_back(x);
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') throw ContractViolation("bad separator on CSV line " + std::to_string(lineno));
      ++p;
    }
    if (row.size() != t.columns.size()) throw ContractViolation("ragged CSV line " + std::to_string(lineno));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Reads a stationary profile CSV (columns r and v) back into a RadialProfile.
inline RadialProfile read_profile_csv(const std::filesystem::path& path) {
  const auto t = parse_csv(read_text(path));
  return profile_from_values(t.column("r"), t.column("v"), "profile_file");
}

// --------------------------------------------------------------------------
// SVG
// --------------------------------------------------------------------------

namespace detail {

struct Series {
  std::vector<double> x, y;
};

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

/// One panel of line plots at vertical offset `top`.
inline std::string svg_panel(const std::string& title, const std::vector<Series>& series, double top) {
  const double left = 70.0, width = 520.0, height = 180.0;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]), xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]), ymax = std::max(ymax, s.y[i]);
    }
  }
  std::string out = "<g>\n<text x=\"" + fmt(left) + "\" y=\"" + fmt(top - 6) + "\" font-size=\"13\">" + title +
                    "</text>\n<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(width) +
                    "\" height=\"" + fmt(height) + "\" fill=\"none\" stroke=\"#888\"/>\n";
  if (!(xmax > xmin)) return out + "</g>\n";
  if (!(ymax > ymin)) ymin -= 0.5, ymax += 0.5;
  out += "<text x=\"4\" y=\"" + fmt(top + 12) + "\" font-size=\"10\">" + fmt(ymax) + "</text>\n";
  out += "<text x=\"4\" y=\"" + fmt(top + height) + "\" font-size=\"10\">" + fmt(ymin) + "</text>\n";
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::string pts;
    const std::size_t stride = std::max<std::size_t>(1, s.x.size() / 600);
    for (std::size_t i = 0; i < s.x.size(); i += stride) {
      if (!std::isfinite(s.y[i])) continue;
      const double px = left + width * (s.x[i] - xmin) / (xmax - xmin);
      const double py = top + height * (1.0 - (s.y[i] - ymin) / (ymax - ymin));
      pts += fmt(px) + "," + fmt(py) + " ";
    }
    out += "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" + std::string(colours[k % 6]) +
           "\" points=\"" + pts + "\"/>\n";
  }
  return out + "</g>\n";
}

inline std::string svg_document(const std::string& body, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"" + fmt(height) + "\">\n" + body +
         "</svg>\n";
}

}  // namespace detail

/// Line plots of v, w and w'' against r for each profile.
inline std::string profile_svg(const std::vector<ProfileRecord>& profiles, double alpha) {
  std::vector<detail::Series> v, w, w2;
  for (const auto& rec : profiles) {
    const auto c = detail::w_columns(rec.profile, alpha);
    v.push_back({rec.profile.r, rec.profile.v});
    w.push_back({rec.profile.r, c.w});
    w2.push_back({rec.profile.r, c.w2});
  }
  const std::string a = detail::fmt(alpha);
  std::string body = detail::svg_panel("v(r)", v, 30.0);
  body += detail::svg_panel("w(r), alpha = " + a, w, 250.0);
  body += detail::svg_panel("w''(r), alpha = " + a, w2, 470.0);
  return detail::svg_document(body, 680.0);
}

/// Histogram of geodesic gaps lhs - rhs.
inline std::string gap_histogram_svg(const ConcavityCertificate& c, std::size_t bins = 40) {
  std::vector<double> gaps;
  for (const auto& r : c.geodesic_results) {
    if (std::isfinite(r.gap)) gaps.push_back(r.gap);
  }
  std::string body = "<text x=\"70\" y=\"24\" font-size=\"13\">geodesic gaps, alpha = " + detail::fmt(c.alpha) +
                     "</text>\n";
  if (!gaps.empty()) {
    const auto [lo_it, hi_it] = std::minmax_element(gaps.begin(), gaps.end());
    double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) lo -= 0.5, hi += 0.5;
    std::vector<std::size_t> count(bins, 0);
    for (double g : gaps) ++count[std::min(bins - 1, static_cast<std::size_t>((g - lo) / (hi - lo) * bins))];
    const double top = *std::max_element(count.begin(), count.end());
    const double w = 520.0 / static_cast<double>(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const double hgt = 180.0 * static_cast<double>(count[k]) / top;
      body += "<rect x=\"" + detail::fmt(70.0 + w * k) + "\" y=\"" + detail::fmt(210.0 - hgt) + "\" width=\"" +
              detail::fmt(w * 0.9) + "\" height=\"" + detail::fmt(hgt) + "\" fill=\"#1f77b4\"/>\n";
    }
    body += "<text x=\"70\" y=\"226\" font-size=\"10\">" + detail::fmt(lo) + "</text>\n";
    body += "<text x=\"560\" y=\"226\" font-size=\"10\">" + detail::fmt(hi) + "</text>\n";
  }
  return detail::svg_document(body, 240.0);
}

// --------------------------------------------------------------------------
// Emission
// --------------------------------------------------------------------------

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

/// Writes the bundle into `dir` and returns the file names written.
/// Files: report.json; <subject>_alpha<k>.csv; plot_alpha<k>.svg and
/// gaps_<k>.svg when SVG is requested.
inline std::vector<std::string> emit(const ReportBundle& b, const std::filesystem::path& dir,
                                     const std::vector<std::string>& formats) {
  return detail::run_stage(Stage::emit, [&] {
    auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::string> files;
    std::vector<double> alphas = b.alphas;
    if (alphas.empty()) alphas = b.config.auto_alpha ? std::vector<double>{0.0} : b.config.alphas;
    const std::string subject = b.profiles.empty() ? "" : (b.evolution ? "evolution" : b.profiles.front().label);
    if (!b.profiles.empty()) {
      for (std::size_t k = 0; k < alphas.size(); ++k) {
        const std::string stem = "_alpha" + std::to_string(k);
        if (wants("csv")) {
          const std::string name = subject + stem + ".csv";
          detail::write_text(dir / name, profiles_csv(b.profiles, alphas[k], b.evolution));
          files.push_back(name);
        }
        if (wants("svg")) {
          const std::string name = "plot" + stem + ".svg";
          detail::write_text(dir / name, profile_svg(b.profiles, alphas[k]));
          files.push_back(name);
        }
      }
    }
    if (wants("svg")) {
      for (std::size_t k = 0; k < b.certificates.size(); ++k) {
        if (b.certificates[k].cert.geodesic_results.empty()) continue;
        const std::string name = "gaps_" + std::to_string(k) + ".svg";
        detail::write_text(dir / name, gap_histogram_svg(b.certificates[k].cert));
        files.push_back(name);
      }
    }
    if (wants("json")) {
      files.push_back("report.json");
      detail::write_text(dir / "report.json", to_json(b, files).dump(2) + "\n");
    }
    return files;
  });
}

}  // namespace warpconcave

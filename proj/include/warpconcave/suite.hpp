#pragma once

// Built-in acceptance suite and a small thread pool that runs a list of
// scenarios, each into its own output directory.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "warpconcave/report.hpp"
#include "warpconcave/scenario.hpp"

namespace warpconcave {

namespace detail {

inline std::string tag_number(double x) {
  std::string s = alpha_label(x);
  std::replace(s.begin(), s.end(), '-', 'm');
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

inline ScenarioConfig base_config(std::string name, const std::string& factor, double param, int N, double R) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.geometry.factor = factor;
  if (factor == "space_form") c.geometry.K = param;
  if (factor == "cubic_perturbed") c.geometry.c = param;
  c.geometry.N = N;
  c.geometry.R = R;
  return c;
}

}  // namespace detail

/// Scenarios behind the acceptance criteria, at desk scale.
inline std::vector<ScenarioConfig> builtin_suite() {
  using detail::base_config;
  using detail::tag_number;
  std::vector<ScenarioConfig> out;
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3}) {
      for (double gamma : {0.0, 0.5}) {
        auto c = base_config("elliptic_K" + tag_number(K) + "_N" + std::to_string(N) + "_g" + tag_number(gamma),
                             "space_form", K, N, 1.0);
        c.problem.kind = ProblemKind::elliptic;
        c.problem.lambda = 1.0;
        c.problem.gamma = gamma;
        out.push_back(c);
      }
    }
  }
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3}) {
      for (double R : {0.5, 1.0}) {
        auto c = base_config("eigen_K" + tag_number(K) + "_N" + std::to_string(N) + "_R" + tag_number(R),
                             "space_form", K, N, R);
        c.problem.kind = ProblemKind::eigen;
        out.push_back(c);
      }
    }
  }
  for (int N : {2, 3}) {
    auto c = base_config("eigen_cubic0p1_N" + std::to_string(N), "cubic_perturbed", 0.1, N, 1.0);
    c.problem.kind = ProblemKind::eigen;
    out.push_back(c);
  }
  {
    auto c = base_config("heat_bump_Km1_N2", "space_form", -1.0, 2, 1.0);
    c.problem.kind = ProblemKind::parabolic;
    c.problem.initial.kind = "bump";
    c.problem.t_end = 10.0;
    out.push_back(c);
  }
  {
    auto c = base_config("heat_ring_Km1_N2", "space_form", -1.0, 2, 1.0);
    c.problem.kind = ProblemKind::parabolic;
    c.problem.initial.kind = "ring";
    c.problem.t_end = 4.0;
    out.push_back(c);
  }
  {
    auto c = base_config("absorption_bump_Km1_N2", "space_form", -1.0, 2, 1.0);
    c.problem.kind = ProblemKind::parabolic;
    c.problem.nonlinearity = {"power_absorption", 1.0, 2.0};
    c.problem.initial.kind = "bump";
    c.problem.t_end = 2.0;
    out.push_back(c);
  }
  {
    auto c = base_config("source_zero_K0_N3", "space_form", 0.0, 3, 1.0);
    c.problem.kind = ProblemKind::parabolic;
    c.problem.nonlinearity = {"power_source", 1.0, 0.0};
    c.problem.initial.kind = "zero";
    c.problem.t_end = 4.0;
    c.problem.steady_state = true;
    out.push_back(c);
  }
  for (double K : {0.0, -1.0}) {
    for (int N : {2, 3, 5}) {
      auto c = base_config("kernel_K" + tag_number(K) + "_N" + std::to_string(N), "space_form", K, N, 3.0);
      c.problem.kind = ProblemKind::heat_kernel;
      c.problem.times = {0.5, 1.0};
      c.problem.delta_check = true;
      out.push_back(c);
    }
  }
  return out;
}

struct SuiteEntry {
  std::string name;
  std::string hash;
  int exit_code = 1;
  std::vector<TagResult> tags;
  std::optional<nlohmann::ordered_json> error;
};

struct SuiteOptions {
  std::filesystem::path out_dir = "out";
  std::optional<std::vector<std::string>> formats;  ///< overrides each config
  std::optional<std::uint64_t> seed;                ///< overrides each config
  unsigned jobs = 1;
};

inline SuiteEntry run_one(ScenarioConfig c, const SuiteOptions& opt) {
  if (opt.seed) c.certification.seed = *opt.seed;
  if (opt.formats) c.outputs.formats = *opt.formats;
  SuiteEntry e;
  e.name = c.name;
  try {
    e.hash = scenario_hash(c);
    const ReportBundle b = run_scenario(c);
    emit(b, opt.out_dir / c.name, c.outputs.formats);
    e.exit_code = b.exit_code();
    e.tags = b.tags;
  } catch (const StageError& err) {
    e.exit_code = 1;
    e.error = err.to_json();
  } catch (const std::exception& err) {
    e.exit_code = 1;
    e.error = nlohmann::ordered_json{{"stage", "setup"}, {"type", "Error"}, {"message", err.what()}};
  }
  return e;
}

/// Runs every scenario on a pool of `opt.jobs` threads. Results keep the
/// input order, so the summary does not depend on scheduling.
inline std::vector<SuiteEntry> run_many(const std::vector<ScenarioConfig>& configs, const SuiteOptions& opt) {
  std::vector<SuiteEntry> results(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < configs.size(); k = next++) results[k] = run_one(configs[k], opt);
  };
  const unsigned n = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

inline int suite_exit_code(const std::vector<SuiteEntry>& results) {
  int code = 0;
  for (const auto& r : results) {
    if (r.exit_code == 1) return 1;
    code = std::max(code, r.exit_code);
  }
  return code;
}

inline nlohmann::ordered_json suite_summary(const std::vector<SuiteEntry>& results) {
  nlohmann::ordered_json j;
  j["format"] = "warpconcave-suite";
  j["format_version"] = 1;
  auto list = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json e;
    e["name"] = r.name;
    e["hash"] = r.hash;
    e["exit_code"] = r.exit_code;
    nlohmann::ordered_json tags = nlohmann::ordered_json::object();
    for (const auto& t : r.tags) {
      if (t.status != "not_evaluated") tags[t.tag] = t.status;
    }
    e["tags"] = tags;
    if (r.error) e["error"] = *r.error;
    list.push_back(std::move(e));
  }
  j["scenarios"] = list;
  j["exit_code"] = suite_exit_code(results);
  return j;
}

}  // namespace warpconcave

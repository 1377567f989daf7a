// Command-line front end: runs scenario files through the pipeline and
// writes reports. Exit status: 0 certified, 2 violated, 1 execution error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "warpconcave/report.hpp"
#include "warpconcave/scenario.hpp"
#include "warpconcave/suite.hpp"

namespace fs = std::filesystem;
using namespace warpconcave;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format;
  unsigned jobs = 0;
  std::string profile;
};

std::vector<std::string> split_formats(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string f; std::getline(ss, f, ',');) {
    if (f != "csv" && f != "json" && f != "svg") throw ConfigError("--format entries must be csv, json or svg");
    out.push_back(f);
  }
  return out;
}

// Flag, then environment, then the config value.
fs::path out_dir(const Globals& g, const std::string& fallback) {
  if (!g.out.empty()) return g.out;
  if (const char* env = std::getenv("WARPCONCAVE_OUT"); env && *env) return env;
  return fallback;
}

unsigned jobs(const Globals& g) {
  if (g.jobs > 0) return g.jobs;
  if (const char* env = std::getenv("WARPCONCAVE_JOBS"); env && *env) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
    throw ConfigError("WARPCONCAVE_JOBS must be a positive integer");
  }
  return 1;
}

void print_error(const nlohmann::ordered_json& err) {
  std::cerr << nlohmann::ordered_json{{"error", err}}.dump() << "\n";
}

void print_summary(const ReportBundle& b, const fs::path& dir) {
  std::cout << b.config.name << " hash=" << b.hash << " exit=" << b.exit_code();
  for (const auto& v : b.verdicts) {
    std::cout << " alpha=" << detail::alpha_label(v.alpha) << ":" << to_string(v.verdict);
  }
  for (const auto& t : b.tags) {
    if (t.status != "not_evaluated") std::cout << " " << t.tag << "=" << t.status;
  }
  std::cout << " out=" << dir.string() << "\n";
}

int run_stages(const Globals& g, Stage last, bool skip_certify, std::optional<ProblemKind> expect) {
  ScenarioConfig c = load_scenario(g.config);
  if (g.seed) c.certification.seed = *g.seed;
  if (!g.format.empty()) c.outputs.formats = split_formats(g.format);
  if (expect && c.problem.kind != *expect) {
    throw ConfigError("this subcommand needs problem.kind = " + to_string(*expect) + ", config has " +
                      to_string(c.problem.kind));
  }
  RunOptions opt;
  opt.last = last;
  opt.skip_certify = skip_certify;
  if (!g.profile.empty()) opt.profile_override = read_profile_csv(g.profile);
  const ReportBundle b = run_scenario(c, opt);
  const fs::path dir = out_dir(g, c.outputs.directory) / c.name;
  emit(b, dir, c.outputs.formats);
  print_summary(b, dir);
  const auto report = to_json(b);
  if (last == Stage::conditions) std::cout << report["conditions"].dump(2) << "\n";
  if (last == Stage::thresholds && skip_certify) std::cout << report["thresholds"].dump(2) << "\n";
  return b.exit_code();
}

int run_suite(const Globals& g) {
  SuiteOptions opt;
  opt.out_dir = out_dir(g, "out/suite");
  opt.seed = g.seed;
  if (!g.format.empty()) opt.formats = split_formats(g.format);
  opt.jobs = jobs(g);
  std::vector<ScenarioConfig> configs;
  if (g.config.empty()) {
    configs = builtin_suite();
  } else {
    configs.push_back(load_scenario(g.config));
  }
  const auto results = run_many(configs, opt);
  fs::create_directories(opt.out_dir);
  const auto summary = suite_summary(results);
  std::ofstream(opt.out_dir / "suite_summary.json") << summary.dump(2) << "\n";
  for (const auto& r : results) {
    std::cout << r.name << " hash=" << r.hash << " exit=" << r.exit_code;
    for (const auto& t : r.tags) {
      if (t.status != "not_evaluated") std::cout << " " << t.tag << "=" << t.status;
    }
    std::cout << "\n";
    if (r.error) print_error(*r.error);
  }
  return suite_exit_code(results);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power-concavity certification for rotationally symmetric problems on warped balls"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--out", g.out, "Output directory (env WARPCONCAVE_OUT)");
  app.add_option("--seed", g.seed, "Seed for geodesic endpoint sampling");
  app.add_option("--format", g.format, "Comma-separated output formats: csv,json,svg");
  app.add_option("--jobs", g.jobs, "Parallel scenarios for suite (env WARPCONCAVE_JOBS)")->check(CLI::PositiveNumber);

  struct Command {
    const char* name;
    const char* help;
    Stage last;
    bool skip_certify;
    std::optional<ProblemKind> kind;
  };
  const std::vector<Command> commands{
      {"conditions", "Check the curvature hypotheses", Stage::conditions, false, std::nullopt},
      {"solve-elliptic", "Solve the semilinear Dirichlet problem", Stage::solve, false, ProblemKind::elliptic},
      {"eigen", "Compute the first Dirichlet eigenpair", Stage::solve, false, ProblemKind::eigen},
      {"solve-parabolic", "Evolve the parabolic problem", Stage::solve, false, ProblemKind::parabolic},
      {"heat-kernel", "Tabulate the heat kernel and its masses", Stage::solve, false, ProblemKind::heat_kernel},
      {"certify", "Solve and certify alpha-concavity", Stage::certify, false, std::nullopt},
      {"thresholds", "Eigenfunction threshold, curvature bounds and Cheng comparison", Stage::thresholds, true,
       std::nullopt},
      {"run", "Full scenario pipeline", Stage::bundle, false, std::nullopt},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->fallthrough();
    sub->add_option("--config", g.config, "Scenario file (YAML)")->required()->check(CLI::ExistingFile);
    if (std::string(cmd.name) == "certify") {
      sub->add_option("--profile", g.profile, "Certify this profile CSV instead of solving")
          ->check(CLI::ExistingFile);
    }
    subs.emplace_back(sub, &cmd);
  }
  auto* suite = app.add_subcommand("suite", "Run the built-in acceptance suite");
  suite->fallthrough();
  suite->add_option("--config", g.config, "Run this scenario file instead of the built-in list")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (suite->parsed()) return run_suite(g);
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) return run_stages(g, cmd->last, cmd->skip_certify, cmd->kind);
    }
  } catch (const StageError& e) {
    print_error(e.to_json());
    return 1;
  } catch (const ConfigError& e) {
    print_error({{"stage", "config"}, {"type", "ConfigError"}, {"message", e.what()}});
    return 1;
  } catch (const std::exception& e) {
    print_error({{"stage", "setup"}, {"type", "Error"}, {"message", e.what()}});
    return 1;
  }
  return 1;
}

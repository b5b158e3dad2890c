// Command-line driver. Every subcommand resolves a RunConfig, runs a fixed
// stage list into a fresh timestamped directory and prints a summary.

#include <CLI11.hpp>

#include <chrono>
#include <deque>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hyperim/config.hpp"
#include "hyperim/pipeline.hpp"

namespace {

using hyperim::KeyValues;

// Adds an optional flag that, when given, becomes `key=value`.
struct FlagSet {
  std::deque<std::pair<std::string, std::optional<std::string>>> slots;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    slots.emplace_back(key, std::nullopt);
    auto* slot = &slots.back().second;
    app->add_option_function<std::string>(flag, [slot](const std::string& v) { *slot = v; }, help);
  }

  void collect(KeyValues& out) const {
    for (const auto& [k, v] : slots)
      if (v) out.emplace_back(k, *v);
  }
};

struct Command {
  CLI::App* app = nullptr;
  std::string name;
  std::string stages;  // empty: take from config
  FlagSet flags;
};

void print_summary(const hyperim::Json& report, const std::filesystem::path& dir) {
  std::cout << "run directory: " << dir.string() << "\n";
  for (const auto& st : report["stages"]) {
    std::cout << "  " << st["stage"].get<std::string>() << ": " << st["status"].get<std::string>();
    if (st.contains("message")) std::cout << " (" << st["message"].get<std::string>() << ")";
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice, truncation and cone diagnostics for the hyperviscous Navier-Stokes system on the 2-torus"};
  app.set_version_flag("--version", std::string(hyperim::kVersion));
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::optional<std::string> output_dir;
  app.add_option_function<std::string>("--config", [&](const std::string& v) { config_path = v; },
                                       "key=value configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", sets, "override a configuration key (key=value), repeatable");
  app.add_option_function<std::string>("--output-dir", [&](const std::string& v) { output_dir = v; },
                                       "base directory for run bundles");

  std::deque<Command> commands;
  const auto make = [&](CLI::App* parent, const std::string& name, const std::string& help,
                        const std::string& stages) -> Command& {
    auto& c = commands.emplace_back();
    c.app = parent->add_subcommand(name, help);
    c.name = name;
    c.stages = stages;
    return c;
  };

  auto* lattice = app.add_subcommand("lattice", "lattice point computations");
  lattice->require_subcommand(1);
  {
    auto& c = make(lattice, "gaps", "record gaps between sums of two squares", "gaps");
    c.flags.add(c.app, "--limit", "gaps_limit", "search limit");
  }
  {
    auto& c = make(lattice, "annulus", "list lattice points with lambda - k <= |j|^2 <= lambda + k", "annulus");
    c.flags.add(c.app, "--lambda", "annulus_lambda", "annulus center");
    c.flags.add(c.app, "--k", "annulus_k", "annulus half width");
  }
  {
    auto& c = make(lattice, "sparse", "search a certified sparse annulus near mu", "sparse");
    c.flags.add(c.app, "--mu", "mu", "target eigenvalue");
    c.flags.add(c.app, "--s", "s", "sparseness exponent");
  }
  {
    auto& c = make(lattice, "strips", "strip-union statistics near mu", "strips");
    c.flags.add(c.app, "--mu", "mu", "target eigenvalue");
    c.flags.add(c.app, "--s", "s", "sparseness exponent");
  }
  {
    auto& c = make(&app, "simulate", "integrate the truncated system from random data", "simulate");
    c.flags.add(c.app, "--M", "M", "Fourier truncation");
    c.flags.add(c.app, "--dt", "dt", "time step");
    c.flags.add(c.app, "--T", "T", "final time");
    c.flags.add(c.app, "--integrator", "integrator", "exponential-integrating-factor | implicit-explicit");
    c.flags.add(c.app, "--seed", "seed", "random seed");
    c.flags.add(c.app, "--beta", "beta", "dissipation exponent");
  }
  {
    auto& c = make(&app, "cone-check", "evolve a pair of solutions and record the cone functional",
                   "sparse,cutoff,cone");
    c.flags.add(c.app, "--mu", "mu", "target eigenvalue");
    c.flags.add(c.app, "--s", "s", "sparseness exponent");
    c.flags.add(c.app, "--beta", "beta", "dissipation exponent");
    c.flags.add(c.app, "--lambda-N", "lambda_N", "explicit cutoff eigenvalue (skips the cutoff choice)");
    c.flags.add(c.app, "--force", "force_cone", "run the evolution even if the cutoff is rejected");
    c.flags.add(c.app, "--dt", "dt", "time step");
    c.flags.add(c.app, "--T", "T", "final time");
  }
  {
    auto& c = make(&app, "averaging-check", "restricted norms of the linearized nonlinearity on the annulus",
                   "sparse,cutoff,averaging");
    c.flags.add(c.app, "--mu", "mu", "target eigenvalue");
    c.flags.add(c.app, "--s", "s", "sparseness exponent");
    c.flags.add(c.app, "--beta", "beta", "dissipation exponent");
    c.flags.add(c.app, "--samples", "averaging_samples", "number of sample fields");
  }
  make(&app, "pipeline", "run the stages listed in the configuration", "");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const Command* chosen = nullptr;
  for (const auto& c : commands)
    if (c.app->parsed()) chosen = &c;
  if (chosen == nullptr) return 2;

  KeyValues flags;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --set expects key=value, got '" << s << "'\n";
      return 2;
    }
    flags.emplace_back(hyperim::detail::trim(s.substr(0, eq)), hyperim::detail::trim(s.substr(eq + 1)));
  }
  chosen->flags.collect(flags);
  if (output_dir) flags.emplace_back("output_dir", *output_dir);
  if (!chosen->stages.empty()) flags.emplace_back("stages", chosen->stages);

  hyperim::RunConfig cfg;
  try {
    cfg = hyperim::resolve_config(config_path, flags);
  } catch (const hyperim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const std::string tag = (chosen->app->get_parent() == lattice ? "lattice-" : "") + chosen->name;
    const auto dir = hyperim::make_run_directory(cfg.output_dir, tag, std::chrono::system_clock::now());
    const auto res = hyperim::run_pipeline(cfg, dir, tag);
    print_summary(res.report, dir);
    return res.exit_code;
  } catch (const hyperim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

// Run configuration: flat key=value files, environment and flag overrides,
// validation, and the canonical echo embedded in every report.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hyperim/dynamics.hpp"
#include "hyperim/error.hpp"
#include "hyperim/lattice.hpp"
#include "hyperim/spectral.hpp"

namespace hyperim {

inline constexpr const char* kVersion = "hyperim 0.1.0";
inline constexpr const char* kOutputDirEnv = "HYPERIM_OUTPUT_DIR";

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline const std::vector<std::string>& known_stages() {
  static const std::vector<std::string> s{"gaps",     "annulus", "sparse",    "strips",   "cutoff",
                                          "simulate", "cone",    "averaging", "absorbing"};
  return s;
}

struct RunConfig {
  SpectralParams params;
  SimConfig sim;
  double mu = 1e4;
  std::int64_t gaps_limit = 100000;
  double annulus_lambda = 1e4;
  double annulus_k = 10.0;
  double cutoff_c = 1.0;
  bool force_cone = false;
  double lambda_N = 0.0;   // 0: taken from the cutoff choice
  double lambda_N1 = 0.0;  // 0: next eigenvalue above lambda_N
  double perturb_delta = 1e-3;
  double perturb_lo = 0.0;  // 0: lambda_N / 2
  double perturb_hi = 0.0;  // 0: 3 lambda_{N+1} / 2
  int averaging_samples = 20;
  int absorbing_samples = 2;
  double transient = 0.5;
  std::string forcing = "none";  // none | shear
  double forcing_amplitude = 1.0;
  std::vector<std::string> stages{"gaps", "sparse", "cutoff", "cone", "averaging"};
  std::string output_dir = "runs";

  bool has_stage(const std::string& s) const { return std::find(stages.begin(), stages.end(), s) != stages.end(); }
  bool cone_checks() const { return has_stage("cone") || has_stage("averaging"); }

  void validate() const {
    params.validate(cone_checks());
    sim.validate();
    if (!(mu >= 2.0)) throw ValidationError("mu must be >= 2");
    if (has_stage("sparse") || has_stage("strips") || has_stage("cutoff") || cone_checks()) {
      if (!(params.s > 0.0 && params.s < 1.0 / 6.0)) throw ValidationError("s must lie in (0, 1/6) for lattice stages");
    }
    if (gaps_limit < 2) throw ValidationError("gaps_limit must be >= 2");
    if (!(annulus_k >= 0.0 && annulus_lambda > annulus_k)) throw ValidationError("annulus needs 0 <= k < lambda");
    if (!(cutoff_c > 0.0)) throw ValidationError("cutoff_c must be positive");
    if (lambda_N < 0.0 || lambda_N1 < 0.0) throw ValidationError("lambda_N, lambda_N1 must be nonnegative");
    if (lambda_N1 > 0.0 && !(lambda_N1 > lambda_N)) throw ValidationError("lambda_N1 must exceed lambda_N");
    if (!(perturb_delta > 0.0)) throw ValidationError("perturb_delta must be positive");
    if (perturb_lo < 0.0 || (perturb_hi > 0.0 && perturb_hi < perturb_lo))
      throw ValidationError("perturbation band must satisfy 0 <= perturb_lo <= perturb_hi");
    if (averaging_samples < 1) throw ValidationError("averaging_samples must be >= 1");
    if (absorbing_samples < 1) throw ValidationError("absorbing_samples must be >= 1");
    if (!(transient >= 0.0 && transient < 1.0)) throw ValidationError("transient must lie in [0, 1)");
    if (forcing != "none" && forcing != "shear") throw ValidationError("forcing must be 'none' or 'shear'");
    if (stages.empty()) throw ValidationError("stages must not be empty");
    for (const auto& s : stages)
      if (std::find(known_stages().begin(), known_stages().end(), s) == known_stages().end())
        throw ValidationError("unknown stage '" + s + "'");
    if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
  }
};

// ---------------------------------------------------------------------------
// Formatting and parsing of single values.

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x))
    throw ValidationError("key '" + key + "': expected a finite number, got '" + v + "'");
  return x;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ValidationError("key '" + key + "': expected an integer, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("key '" + key + "': expected a boolean, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string join_list(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// key=value text. Blank lines and '#' comments (full-line or trailing) are ignored.

inline KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
    if (seen.count(key))
      throw ValidationError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first on line " +
                            std::to_string(seen[key]) + ")");
    seen[key] = lineno;
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline KeyValues read_key_value_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_key_values(ss.str());
}

// Applies one key; returns false for unknown keys.
inline bool apply_key(RunConfig& c, const std::string& k, const std::string& v) {
  using namespace detail;
  if (k == "beta") c.params.beta = parse_double(k, v);
  else if (k == "nu") c.params.nu = parse_double(k, v);
  else if (k == "M") c.params.M = static_cast<int>(parse_int(k, v));
  else if (k == "s") c.params.s = parse_double(k, v);
  else if (k == "rho") c.params.rho = parse_double(k, v);
  else if (k == "dt") c.sim.dt = parse_double(k, v);
  else if (k == "T") c.sim.T = parse_double(k, v);
  else if (k == "integrator") c.sim.integrator = parse_integrator(v);
  else if (k == "dealias") c.sim.dealias = parse_bool(k, v);
  else if (k == "seed") c.sim.seed = static_cast<std::uint64_t>(parse_int(k, v));
  else if (k == "nonlinear") c.sim.nonlinear = parse_bool(k, v);
  else if (k == "init_norm") c.sim.init_norm = parse_double(k, v);
  else if (k == "mu") c.mu = parse_double(k, v);
  else if (k == "gaps_limit") c.gaps_limit = parse_int(k, v);
  else if (k == "annulus_lambda") c.annulus_lambda = parse_double(k, v);
  else if (k == "annulus_k") c.annulus_k = parse_double(k, v);
  else if (k == "cutoff_c") c.cutoff_c = parse_double(k, v);
  else if (k == "force_cone") c.force_cone = parse_bool(k, v);
  else if (k == "lambda_N") c.lambda_N = parse_double(k, v);
  else if (k == "lambda_N1") c.lambda_N1 = parse_double(k, v);
  else if (k == "perturb_delta") c.perturb_delta = parse_double(k, v);
  else if (k == "perturb_lo") c.perturb_lo = parse_double(k, v);
  else if (k == "perturb_hi") c.perturb_hi = parse_double(k, v);
  else if (k == "averaging_samples") c.averaging_samples = static_cast<int>(parse_int(k, v));
  else if (k == "absorbing_samples") c.absorbing_samples = static_cast<int>(parse_int(k, v));
  else if (k == "transient") c.transient = parse_double(k, v);
  else if (k == "forcing") c.forcing = v;
  else if (k == "forcing_amplitude") c.forcing_amplitude = parse_double(k, v);
  else if (k == "stages") c.stages = split_list(v);
  else if (k == "output_dir") c.output_dir = v;
  else return false;
  return true;
}

// Canonical echo, fixed key order; feeding it back reproduces the config.
inline KeyValues to_key_values(const RunConfig& c) {
  const auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {{"beta", format_double(c.params.beta)},
          {"nu", format_double(c.params.nu)},
          {"M", std::to_string(c.params.M)},
          {"s", format_double(c.params.s)},
          {"rho", format_double(c.params.rho)},
          {"dt", format_double(c.sim.dt)},
          {"T", format_double(c.sim.T)},
          {"integrator", to_string(c.sim.integrator)},
          {"dealias", b(c.sim.dealias)},
          {"seed", std::to_string(c.sim.seed)},
          {"nonlinear", b(c.sim.nonlinear)},
          {"init_norm", format_double(c.sim.init_norm)},
          {"mu", format_double(c.mu)},
          {"gaps_limit", std::to_string(c.gaps_limit)},
          {"annulus_lambda", format_double(c.annulus_lambda)},
          {"annulus_k", format_double(c.annulus_k)},
          {"cutoff_c", format_double(c.cutoff_c)},
          {"force_cone", b(c.force_cone)},
          {"lambda_N", format_double(c.lambda_N)},
          {"lambda_N1", format_double(c.lambda_N1)},
          {"perturb_delta", format_double(c.perturb_delta)},
          {"perturb_lo", format_double(c.perturb_lo)},
          {"perturb_hi", format_double(c.perturb_hi)},
          {"averaging_samples", std::to_string(c.averaging_samples)},
          {"absorbing_samples", std::to_string(c.absorbing_samples)},
          {"transient", format_double(c.transient)},
          {"forcing", c.forcing},
          {"forcing_amplitude", format_double(c.forcing_amplitude)},
          {"stages", detail::join_list(c.stages)},
          {"output_dir", c.output_dir}};
}

inline std::string key_value_text(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// defaults < file < environment (output directory) < flags. When s is not
// given anywhere it defaults to the midpoint of (3 - 2 beta, 1/6) for the
// resolved beta.
inline RunConfig resolve_config(const KeyValues& file, const KeyValues& flags, const EnvLookup& env = process_env) {
  RunConfig c;
  bool s_given = false;
  const auto apply_all = [&](const KeyValues& kv, const std::string& origin) {
    for (const auto& [k, v] : kv) {
      if (!apply_key(c, k, v)) throw ValidationError(origin + ": unknown key '" + k + "'");
      if (k == "s") s_given = true;
    }
  };
  apply_all(file, "config file");
  if (const auto dir = env(kOutputDirEnv)) c.output_dir = *dir;
  apply_all(flags, "command line");
  if (!s_given) c.params.s = (3.0 - 2.0 * c.params.beta + 1.0 / 6.0) / 2.0;
  c.validate();
  return c;
}

inline RunConfig resolve_config(const std::optional<std::string>& path, const KeyValues& flags,
                                const EnvLookup& env = process_env) {
  return resolve_config(path ? read_key_value_file(*path) : KeyValues{}, flags, env);
}

}  // namespace hyperim

#pragma once

// Stage orchestration: gaps -> sparse -> strips -> cutoff -> simulate -> cone
// -> averaging -> absorbing. Each stage reports a status; mathematical
// negative results are "finding", only engineering failures are "error".

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperim/averaging.hpp"
#include "hyperim/config.hpp"
#include "hyperim/dynamics.hpp"
#include "hyperim/error.hpp"
#include "hyperim/field.hpp"
#include "hyperim/lattice.hpp"
#include "hyperim/spectral.hpp"

namespace hyperim {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error("write failed for '" + path.string() + "'");
}

// <base>/<tag>-YYYYmmddTHHMMSSZ, with a numeric suffix if taken.
inline fs::path make_run_directory(const fs::path& base, const std::string& tag,
                                   std::chrono::system_clock::time_point now = std::chrono::system_clock::now()) {
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) throw Error("cannot create output directory '" + base.string() + "': " + ec.message());
  const std::string stem = tag + "-" + stamp;
  for (int n = 0; n < 10000; ++n) {
    const fs::path p = base / (n == 0 ? stem : stem + "-" + std::to_string(n));
    if (fs::create_directory(p, ec)) return p;
    if (ec) throw Error("cannot create run directory '" + p.string() + "': " + ec.message());
  }
  throw Error("cannot allocate a run directory under '" + base.string() + "'");
}

// ---------------------------------------------------------------------------
// CSV writers.

inline std::string gaps_csv(const std::vector<GapRecord>& r) {
  std::string out = "lower,upper,gap\n";
  for (const auto& g : r) out += std::to_string(g.lower) + "," + std::to_string(g.upper) + "," + std::to_string(g.gap) + "\n";
  return out;
}

inline std::string points_csv(const std::vector<LatticePoint>& pts) {
  std::string out = "j1,j2,norm2\n";
  for (const auto& p : pts) out += std::to_string(p.j1) + "," + std::to_string(p.j2) + "," + std::to_string(p.norm2()) + "\n";
  return out;
}

inline std::string trace_csv(const ConeTrace& tr) {
  std::string out = "t,V,dVdt,norm_v_sq,alpha,rhs_bound,margin\n";
  for (const auto& r : tr.records)
    out += format_double(r.t) + "," + format_double(r.V) + "," + format_double(r.dVdt) + "," +
           format_double(r.norm_v_sq) + "," + format_double(r.alpha) + "," + format_double(r.rhs_bound) + "," +
           format_double(r.margin) + "\n";
  return out;
}

inline std::string averaging_csv(const AveragingReport& rep) {
  std::string out = "id,regime,u_norm,norm,bound,pass,tail,tail_bound,product_factor\n";
  for (const auto& s : rep.samples)
    out += std::to_string(s.id) + "," + s.regime + "," + format_double(s.u_norm) + "," + format_double(s.norm) + "," +
           format_double(rep.bound) + "," + (s.pass ? "true" : "false") + "," + format_double(s.mechanism.tail) + "," +
           format_double(s.mechanism.tail_bound) + "," + format_double(s.mechanism.product_factor) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// JSON views.

inline Json config_json(const RunConfig& c) {
  Json j = Json::object();
  for (const auto& [k, v] : to_key_values(c)) j[k] = v;
  return j;
}

inline Json to_json(const SparseAnnulus& a) {
  const auto w = a.window();
  return {{"mu", a.mu},
          {"s", a.s},
          {"m0", a.m0},
          {"lambda", a.lambda},
          {"half_width", a.half_width},
          {"window", {w.lo, w.hi}},
          {"separation_threshold", a.separation_threshold},
          {"lambda_threshold", a.lambda_threshold},
          {"certified_threshold", a.certified_threshold()},
          {"points", a.points.size()},
          {"min_distance", a.min_distance ? Json(*a.min_distance) : Json()},
          {"width_ratio", a.width_ratio()},
          {"certified", certify_sparse_annulus(a)}};
}

inline Json to_json(const CutoffChoice& c) {
  return {{"accepted", c.accepted},       {"lambda_N", c.lambda_N},
          {"lambda_N1", c.lambda_N1},     {"k", c.k},
          {"s", c.s},                     {"required_ratio", c.required_ratio},
          {"achieved_ratio", c.achieved_ratio}, {"failures", c.failures}};
}

inline Json to_json(const ConeSummary& s) {
  return {{"min_margin", s.min_margin},
          {"fraction_satisfied", s.fraction_satisfied},
          {"worst_time", s.worst_time},
          {"holds", s.holds},
          {"linear_gap_condition", s.linear_gap_condition},
          {"message", s.message}};
}

inline Json to_json(const AveragingReport& r) {
  Json norms = Json::array();
  for (const auto& s : r.samples) norms.push_back({{"id", s.id}, {"regime", s.regime}, {"norm", s.norm}, {"pass", s.pass}});
  return {{"lambda_N", r.lambda_N},
          {"k", r.k},
          {"beta", r.beta},
          {"s", r.s},
          {"r", r.r},
          {"bound", r.bound},
          {"window", {r.window_lo, r.window_hi}},
          {"lattice_modes", r.lattice_modes},
          {"matrix_dim", r.matrix_dim},
          {"max_norm", r.max_norm},
          {"mechanism_tail", r.mechanism_tail},
          {"all_pass", r.all_pass},
          {"achieved_ratio", r.achieved_ratio},
          {"sampled_norms", norms}};
}

// ---------------------------------------------------------------------------

struct PipelineResult {
  Json report;
  int exit_code = 0;
};

namespace detail {

struct PipelineState {
  const RunConfig& cfg;
  const fs::path& dir;
  std::optional<SparseAnnulus> annulus;
  bool annulus_searched = false;
  std::optional<CutoffChoice> cutoff;

  FourierField forcing(int M) const {
    if (cfg.forcing == "shear") return cfg.params.nu * sine_shear(M, cfg.forcing_amplitude);
    return FourierField(M);
  }
};

inline Json stage_gaps(PipelineState& st) {
  const auto r = record_gaps(st.cfg.gaps_limit);
  write_text_file(st.dir / "gaps.csv", gaps_csv(r));
  Json j{{"limit", st.cfg.gaps_limit}, {"records", r.size()}, {"file", "gaps.csv"}};
  if (!r.empty()) j["largest"] = {{"lower", r.back().lower}, {"upper", r.back().upper}, {"gap", r.back().gap}};
  j["status"] = "ok";
  return j;
}

inline Json stage_annulus(PipelineState& st) {
  const auto pts = annulus_points(st.cfg.annulus_lambda, st.cfg.annulus_k);
  write_text_file(st.dir / "annulus_points.csv", points_csv(pts));
  Json j{{"lambda", st.cfg.annulus_lambda}, {"k", st.cfg.annulus_k}, {"points", pts.size()}};
  if (const auto d = min_pairwise_distance(pts)) j["min_distance"] = *d;
  else j["min_distance"] = nullptr;
  j["file"] = "annulus_points.csv";
  j["status"] = "ok";
  return j;
}

inline Json stage_sparse(PipelineState& st) {
  if (!st.annulus_searched) {
    st.annulus = find_sparse_annulus(st.cfg.mu, st.cfg.params.s);
    st.annulus_searched = true;
  }
  if (!st.annulus) return {{"status", "finding"}, {"message", "no sparse annulus in the search range"}};
  write_text_file(st.dir / "sparse_annulus.csv", points_csv(st.annulus->points));
  Json j = to_json(*st.annulus);
  j["file"] = "sparse_annulus.csv";
  j["status"] = "ok";
  return j;
}

inline Json stage_strips(PipelineState& st) {
  const auto s = strip_statistics(st.cfg.mu, st.cfg.params.s);
  return {{"mu", s.mu},
          {"s", s.s},
          {"strip_count", s.strip_count},
          {"lattice_hits", s.lattice_hits},
          {"annulus_points", s.annulus_points},
          {"status", "ok"}};
}

inline Json stage_cutoff(PipelineState& st) {
  if (!st.annulus_searched) stage_sparse(st);
  if (!st.annulus) throw StageError("cutoff: no sparse annulus available");
  const auto limit = static_cast<std::int64_t>(std::ceil(st.annulus->lambda * 1.1)) + 100;
  st.cutoff = choose_cutoff(eigenvalues_with_multiplicity(limit), *st.annulus, st.cfg.cutoff_c);
  Json j = to_json(*st.cutoff);
  j["status"] = st.cutoff->accepted ? "ok" : "finding";
  return j;
}

inline FourierField random_initial(int M, const RunConfig& cfg, Rng& rng) {
  FourierField u = random_field(M, cfg.params.ball_index() + 1.0, rng);
  const double n = sobolev_norm(u, cfg.params.ball_index());
  return n > 0.0 ? (cfg.sim.init_norm / n) * u : u;
}

inline Json stage_simulate(PipelineState& st) {
  const auto& cfg = st.cfg;
  Rng rng(cfg.sim.seed);
  const FourierField u0 = random_initial(cfg.params.M, cfg, rng);
  const FourierField f = st.forcing(cfg.params.M);
  std::string csv = "t,energy,ball_norm\n";
  FourierField u = u0;
  double sup_ball = 0.0;
  for (std::int64_t n = 0; n <= cfg.sim.steps(); ++n) {
    if (n > 0) u = step(u, f, cfg.params, cfg.sim);
    const double ball = sobolev_norm(u, cfg.params.ball_index());
    sup_ball = std::max(sup_ball, ball);
    csv += format_double(static_cast<double>(n) * cfg.sim.dt) + "," + format_double(norm2(u)) + "," +
           format_double(ball) + "\n";
  }
  write_text_file(st.dir / "simulate_energy.csv", csv);
  write_text_file(st.dir / "u_initial.csv", snapshot_csv(u0));
  write_text_file(st.dir / "u_final.csv", snapshot_csv(u));
  return {{"M", cfg.params.M},
          {"steps", cfg.sim.steps()},
          {"final_energy", norm2(u)},
          {"sup_ball_norm", sup_ball},
          {"divergence_defect", u.divergence_defect()},
          {"files", {"simulate_energy.csv", "u_initial.csv", "u_final.csv"}},
          {"status", "ok"}};
}

inline std::optional<ConeWindow> cone_window(PipelineState& st, Json& j) {
  const auto& cfg = st.cfg;
  if (cfg.lambda_N > 0.0) {
    double next = cfg.lambda_N1;
    if (next == 0.0) {
      const auto lim = static_cast<std::int64_t>(std::ceil(cfg.lambda_N * 1.1)) + 100;
      for (const auto& e : eigenvalues_with_multiplicity(lim))
        if (static_cast<double>(e.eigenvalue) > cfg.lambda_N) {
          next = static_cast<double>(e.eigenvalue);
          break;
        }
    }
    j["cutoff_source"] = "config";
    return ConeWindow{cfg.lambda_N, next};
  }
  if (!st.cutoff) stage_cutoff(st);
  j["cutoff_source"] = "annulus";
  j["cutoff"] = to_json(*st.cutoff);
  if (!st.cutoff->accepted && !cfg.force_cone) return std::nullopt;
  return ConeWindow{st.cutoff->lambda_N, st.cutoff->lambda_N1};
}

inline Json stage_cone(PipelineState& st) {
  const auto& cfg = st.cfg;
  Json j = Json::object();
  const auto win = cone_window(st, j);
  if (!win) {
    j["status"] = "finding";
    j["message"] = "cutoff rejected; set force_cone=true to run the evolution anyway";
    return j;
  }
  const int M = std::max(cfg.params.M, static_cast<int>(isqrt(static_cast<std::int64_t>(win->lambda_N1))) + 1);
  SpectralParams p = cfg.params;
  p.M = M;
  Rng rng(cfg.sim.seed);
  RunConfig local = cfg;
  local.params = p;
  const FourierField u1 = random_initial(M, local, rng);
  const double lo = cfg.perturb_lo > 0.0 ? cfg.perturb_lo : 0.5 * win->lambda_N;
  const double hi = cfg.perturb_hi > 0.0 ? cfg.perturb_hi : 1.5 * win->lambda_N1;
  const FourierField u2 = perturbed_partner(u1, lo, hi, cfg.perturb_delta, rng);
  const ConeTrace tr = evolve_pair(u1, u2, st.forcing(M), p, cfg.sim, *win);
  write_text_file(st.dir / "trace.csv", trace_csv(tr));
  const ConeSummary s = cone_report(tr);
  j["lambda_N"] = win->lambda_N;
  j["lambda_N1"] = win->lambda_N1;
  j["M"] = M;
  j["perturbation_band"] = {lo, hi};
  j["records"] = tr.records.size();
  j["summary"] = to_json(s);
  j["file"] = "trace.csv";
  j["status"] = s.holds ? "ok" : "finding";
  return j;
}

inline Json stage_averaging(PipelineState& st) {
  const auto& cfg = st.cfg;
  if (!st.cutoff) stage_cutoff(st);
  const SparseAnnulus& a = *st.annulus;
  const double lambda_N = st.cutoff->lambda_N;
  const double r = std::pow(lambda_N, a.s / 2.0);
  const auto samples = averaging_samples(a.window(), r, cfg.params, cfg.averaging_samples, cfg.sim.seed);
  const AveragingReport rep = check_averaging(samples, a, lambda_N, cfg.params);
  write_text_file(st.dir / "averaging_norms.csv", averaging_csv(rep));

  // low-frequency factors against window-supported fields
  std::vector<LatticePoint> low, mid;
  for (const auto& j : averaging_support(a.window(), r))
    if (static_cast<double>(j.norm2()) <= r * r) low.push_back(j);
  for (const auto& j : shell_points(a.window()))
    if (is_positive_half(j)) mid.push_back(j);
  Rng rng(cfg.sim.seed + 1);
  double residual = 0.0;
  for (int t = 0; t < 20 && !low.empty() && !mid.empty(); ++t) {
    const int M = samples.front().M();
    residual = std::max(residual, cancellation_residual(random_field_on(M, low, 0.0, rng),
                                                        random_field_on(M, mid, 0.0, rng), a.window()));
  }
  Json j = to_json(rep);
  j["cutoff_accepted"] = st.cutoff->accepted;
  j["cancellation_residual"] = residual;
  j["file"] = "averaging_norms.csv";
  j["status"] = rep.all_pass ? "ok" : "finding";
  return j;
}

inline Json stage_absorbing(PipelineState& st) {
  const auto& cfg = st.cfg;
  const auto est = estimate_absorbing_radius(st.forcing(cfg.params.M), cfg.params, cfg.sim, cfg.absorbing_samples,
                                             cfg.transient);
  Json j{{"radius", est.radius}, {"still_growing", est.still_growing}, {"per_sample", est.per_sample},
         {"transient", cfg.transient}};
  if (est.still_growing) j["warning"] = "sup still growing at the horizon; estimate not converged";
  j["status"] = est.still_growing ? "finding" : "ok";
  return j;
}

}  // namespace detail

// Runs the configured stages in dependency order and writes the bundle
// (report.json, config.txt, per-stage CSV) into run_dir.
inline PipelineResult run_pipeline(const RunConfig& cfg, const fs::path& run_dir, const std::string& command = "pipeline") {
  PipelineResult res;
  res.report = Json::object();
  res.report["version"] = kVersion;
  res.report["command"] = command;
  res.report["config"] = config_json(cfg);
  Json stages = Json::array();
  detail::PipelineState st{cfg, run_dir, std::nullopt, false, std::nullopt};
  for (const auto& name : known_stages()) {
    if (!cfg.has_stage(name)) continue;
    Json j;
    try {
      if (name == "gaps") j = detail::stage_gaps(st);
      else if (name == "annulus") j = detail::stage_annulus(st);
      else if (name == "sparse") j = detail::stage_sparse(st);
      else if (name == "strips") j = detail::stage_strips(st);
      else if (name == "cutoff") j = detail::stage_cutoff(st);
      else if (name == "simulate") j = detail::stage_simulate(st);
      else if (name == "cone") j = detail::stage_cone(st);
      else if (name == "averaging") j = detail::stage_averaging(st);
      else if (name == "absorbing") j = detail::stage_absorbing(st);
    } catch (const BlowUp& e) {
      j = {{"status", "error"}, {"error", "blow-up"}, {"message", e.what()}};
      res.exit_code = 1;
    } catch (const Error& e) {
      j = {{"status", "error"}, {"message", e.what()}};
      res.exit_code = 1;
    }
    Json entry{{"stage", name}};
    entry.update(j);
    stages.push_back(std::move(entry));
  }
  res.report["stages"] = std::move(stages);
  res.report["exit_code"] = res.exit_code;
  write_text_file(run_dir / "config.txt", key_value_text(to_key_values(cfg)));
  write_text_file(run_dir / "report.json", res.report.dump(2) + "\n");
  return res;
}

}  // namespace hyperim

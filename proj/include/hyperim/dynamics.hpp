#pragma once

// Time integration of the prepared equation
//
//   du/dt + nu A^beta u + B(W(u), W(u)) = f,
//
// solution-pair evolution with the cone functional V = |Q_N v|^2 - |P_N v|^2,
// tracking distances and absorbing-radius estimation.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hyperim/error.hpp"
#include "hyperim/field.hpp"
#include "hyperim/spectral.hpp"
#include "hyperim/stats.hpp"
#include "hyperim/truncation.hpp"

namespace hyperim {

enum class Integrator { integrating_factor_rk4, imex_ars222 };

inline std::string to_string(Integrator i) {
  return i == Integrator::integrating_factor_rk4 ? "exponential-integrating-factor" : "implicit-explicit";
}

inline Integrator parse_integrator(const std::string& name) {
  if (name == "exponential-integrating-factor" || name == "if-rk4") return Integrator::integrating_factor_rk4;
  if (name == "implicit-explicit" || name == "imex") return Integrator::imex_ars222;
  throw ValidationError("unknown integrator '" + name + "'");
}

struct SimConfig {
  double dt = 1e-3;
  double T = 0.1;
  Integrator integrator = Integrator::integrating_factor_rk4;
  bool dealias = true;
  std::uint64_t seed = 1;
  bool nonlinear = true;
  double init_norm = 1.0;  // H^{3+eps} norm of random initial data

  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(T >= dt)) throw ValidationError("T must be at least dt");
    if (!(init_norm >= 0.0)) throw ValidationError("init_norm must be nonnegative");
  }
  std::int64_t steps() const { return std::max<std::int64_t>(1, std::llround(T / dt)); }
  ProductOptions product() const { return {.dealias = dealias, .direct = false}; }
};

// (amplitude sin x2, 0)
inline FourierField sine_shear(int M, double amplitude) {
  FourierField u(M);
  u.set_real_pair({0, 1}, {Complex(0.0, -0.5 * amplitude), 0.0});
  return u;
}

// ---------------------------------------------------------------------------
// Right-hand sides.

namespace detail {
inline FourierField nonlinear_part(const FourierField& u, const FourierField& f, const SpectralParams& params,
                                   ProductOptions opts, bool nonlinear) {
  if (!nonlinear) return f;
  const FourierField w = apply_W(u, params);
  return f - bilinear_B(w, w, opts);
}

inline double dissipation_rate(LatticePoint j, const SpectralParams& params) {
  return params.nu * std::pow(static_cast<double>(j.norm2()), params.beta);
}

inline FourierField scale_modes(const FourierField& u, const SpectralParams& params, double dt_factor) {
  return u.map([&](LatticePoint j, const Vec2c& c) { return std::exp(-dissipation_rate(j, params) * dt_factor) * c; });
}

inline FourierField implicit_solve(const FourierField& u, const SpectralParams& params, double gdt) {
  return u.map([&](LatticePoint j, const Vec2c& c) { return (1.0 / (1.0 + gdt * dissipation_rate(j, params))) * c; });
}
}  // namespace detail

// f - nu A^beta u - B(W(u), W(u))
inline FourierField rhs_prepared(const FourierField& u, const FourierField& f, const SpectralParams& params,
                                 ProductOptions opts = {}, bool nonlinear = true) {
  return detail::nonlinear_part(u, f, params, opts, nonlinear) - params.nu * apply_A_power(u, params.beta);
}

// f - A^beta u - A^{1/2} F(u); defined for nu = 1 only.
inline FourierField rhs_abstract(const FourierField& u, const FourierField& f, const SpectralParams& params,
                                 ProductOptions opts = {}) {
  if (params.nu != 1.0) throw DomainError("rhs_abstract: requires nu = 1");
  return f - apply_A_power(u, params.beta) - apply_A_power(nonlinearity_F(u, params, opts), 0.5);
}

// d/dt |u|^2 = 2 (du/dt, u)
inline double energy_rate(const FourierField& u, const FourierField& f, const SpectralParams& params,
                          ProductOptions opts = {}, bool nonlinear = true) {
  return 2.0 * inner(rhs_prepared(u, f, params, opts, nonlinear), u).real();
}

// -2 nu |A^{beta/2} u|^2 - 2 (B(W, W), u) + 2 (f, u)
inline double energy_rate_assembled(const FourierField& u, const FourierField& f, const SpectralParams& params,
                                    ProductOptions opts = {}, bool nonlinear = true) {
  double out = -2.0 * params.nu * sobolev_norm2(u, params.beta) + 2.0 * inner(f, u).real();
  if (nonlinear) {
    const FourierField w = apply_W(u, params);
    out -= 2.0 * inner(bilinear_B(w, w, opts), u).real();
  }
  return out;
}

// ---------------------------------------------------------------------------
// One time step. The linear part is exact in both schemes' stiff limit:
//  - integrating-factor RK4 (order 4): e^{-nu |j|^{2 beta} dt} applied per mode;
//  - ARS(2,2,2) implicit-explicit (order 2), L-stable in the linear part.

inline FourierField step(const FourierField& u, const FourierField& f, const SpectralParams& params,
                         const SimConfig& cfg) {
  const double dt = cfg.dt;
  const auto opts = cfg.product();
  const auto N = [&](const FourierField& x) { return detail::nonlinear_part(x, f, params, opts, cfg.nonlinear); };
  FourierField out(u.M());
  if (cfg.integrator == Integrator::integrating_factor_rk4) {
    const auto E = [&](const FourierField& x) { return detail::scale_modes(x, params, dt); };
    const auto E2 = [&](const FourierField& x) { return detail::scale_modes(x, params, 0.5 * dt); };
    const FourierField k1 = N(u);
    const FourierField E2u = E2(u);
    const FourierField k2 = N(E2(axpy(u, 0.5 * dt, k1)));
    const FourierField k3 = N(axpy(E2u, 0.5 * dt, k2));
    const FourierField k4 = N(axpy(E(u), dt, E2(k3)));
    out = axpy(E(u), dt / 6.0, E(k1) + 2.0 * E2(k2 + k3) + k4);
  } else {
    const double g = 1.0 - 1.0 / std::sqrt(2.0);
    const double d = 1.0 - 1.0 / (2.0 * g);
    const FourierField n0 = N(u);
    const FourierField U1 = detail::implicit_solve(axpy(u, g * dt, n0), params, g * dt);
    const FourierField n1 = N(U1);
    const FourierField LU1 = -params.nu * apply_A_power(U1, params.beta);
    const FourierField rhs = axpy(axpy(u, dt, d * n0 + (1.0 - d) * n1), (1.0 - g) * dt, LU1);
    out = detail::implicit_solve(rhs, params, g * dt);
  }
  if (!out.all_finite()) throw BlowUp("step: non-finite coefficient");
  return out;
}

// States at t = 0, dt, ..., steps*dt.
inline std::vector<FourierField> trajectory(const FourierField& u0, const FourierField& f,
                                            const SpectralParams& params, const SimConfig& cfg) {
  std::vector<FourierField> out{u0};
  out.reserve(static_cast<std::size_t>(cfg.steps()) + 1);
  for (std::int64_t n = 0; n < cfg.steps(); ++n) out.push_back(step(out.back(), f, params, cfg));
  return out;
}

// ---------------------------------------------------------------------------
// Cone functional along a solution pair.

struct ConeRecord {
  double t = 0.0;
  double V = 0.0;
  double dVdt = 0.0;
  double norm_v_sq = 0.0;
  double alpha = 0.0;
  double rhs_bound = 0.0;
  double margin = 0.0;
};

struct ConeTrace {
  double lambda_N = 0.0;
  double lambda_N1 = 0.0;
  double beta = 0.0;
  std::vector<ConeRecord> records;
};

// lambda_N, lambda_{N+1} splitting P_N / Q_N.
struct ConeWindow {
  double lambda_N = 0.0;
  double lambda_N1 = 0.0;
};

// dV/dt = -2 nu (|A^{beta/2} q|^2 - |A^{beta/2} p|^2) + 2 (F(u1) - F(u2), A^{1/2} (p - q))
inline ConeRecord cone_record(double t, const FourierField& u1, const FourierField& u2, const SpectralParams& params,
                              ConeWindow win, ProductOptions opts = {}, bool nonlinear = true) {
  const FourierField v = u1 - u2;
  const FourierField p = project(v, ModeProjector::low(win.lambda_N));
  const FourierField q = project(v, ModeProjector::high(win.lambda_N));
  ConeRecord r;
  r.t = t;
  r.norm_v_sq = norm2(v);
  r.V = norm2(q) - norm2(p);
  r.dVdt = -2.0 * params.nu * (sobolev_norm2(q, params.beta) - sobolev_norm2(p, params.beta));
  if (nonlinear) {
    const FourierField dF = nonlinearity_F(u1, params, opts) - nonlinearity_F(u2, params, opts);
    r.dVdt += 2.0 * inner(dF, apply_A_power(p - q, 0.5)).real();
  }
  r.alpha = 0.5 * (std::pow(win.lambda_N1, params.beta) + std::pow(win.lambda_N, params.beta));
  r.rhs_bound = -std::pow(win.lambda_N, params.beta - 1.0) / 8.0 * r.norm_v_sq;
  r.margin = r.rhs_bound - (r.dVdt + 2.0 * r.alpha * r.V);
  return r;
}

inline ConeTrace evolve_pair(FourierField u1, FourierField u2, const FourierField& f, const SpectralParams& params,
                             const SimConfig& cfg, ConeWindow win) {
  if (u1.M() != u2.M()) throw SizeMismatch("evolve_pair: truncation radii differ");
  if (!(win.lambda_N1 > win.lambda_N && win.lambda_N > 0.0))
    throw InvalidRange("evolve_pair: need 0 < lambda_N < lambda_{N+1}");
  ConeTrace trace{win.lambda_N, win.lambda_N1, params.beta, {}};
  const auto opts = cfg.product();
  trace.records.reserve(static_cast<std::size_t>(cfg.steps()) + 1);
  trace.records.push_back(cone_record(0.0, u1, u2, params, win, opts, cfg.nonlinear));
  for (std::int64_t n = 1; n <= cfg.steps(); ++n) {
    u1 = step(u1, f, params, cfg);
    u2 = step(u2, f, params, cfg);
    trace.records.push_back(cone_record(static_cast<double>(n) * cfg.dt, u1, u2, params, win, opts, cfg.nonlinear));
    if (!std::isfinite(trace.records.back().margin)) throw BlowUp("evolve_pair: non-finite cone margin");
  }
  return trace;
}

struct ConeSummary {
  double min_margin = 0.0;
  double fraction_satisfied = 0.0;
  double worst_time = 0.0;
  bool holds = false;
  // lambda_{N+1}^beta - lambda_N^beta >= lambda_N^{beta-1}/8: sufficient for the linear flow
  bool linear_gap_condition = false;
  std::string message;
};

inline ConeSummary cone_report(const ConeTrace& trace) {
  if (trace.records.empty()) throw InvalidRange("cone_report: empty trace");
  ConeSummary s;
  s.min_margin = trace.records.front().margin;
  s.worst_time = trace.records.front().t;
  std::size_t ok = 0;
  for (const auto& r : trace.records) {
    if (r.margin >= 0.0) ++ok;
    if (r.margin < s.min_margin) {
      s.min_margin = r.margin;
      s.worst_time = r.t;
    }
  }
  s.fraction_satisfied = static_cast<double>(ok) / static_cast<double>(trace.records.size());
  s.holds = ok == trace.records.size();
  s.linear_gap_condition = std::pow(trace.lambda_N1, trace.beta) - std::pow(trace.lambda_N, trace.beta) >=
                           std::pow(trace.lambda_N, trace.beta - 1.0) / 8.0;
  s.message = s.holds ? "cone holds along trajectory" : "cone inequality violated along trajectory";
  return s;
}

// ---------------------------------------------------------------------------
// Tracking distance and absorbing radius.

struct TrackingResult {
  std::vector<double> distance;
  std::optional<double> rate;  // least-squares slope of log distance; empty if any distance is 0
};

inline TrackingResult tracking_distance(const std::vector<double>& times, const std::vector<FourierField>& a,
                                        const std::vector<FourierField>& b, double transient_fraction = 0.0) {
  if (a.size() != b.size() || a.size() != times.size())
    throw SizeMismatch("tracking_distance: trajectories do not share a time grid");
  TrackingResult out;
  for (std::size_t i = 0; i < a.size(); ++i) out.distance.push_back(std::sqrt(norm2(a[i] - b[i])));
  const auto first = static_cast<std::size_t>(std::floor(transient_fraction * static_cast<double>(a.size())));
  std::vector<double> t, logd;
  for (std::size_t i = first; i < a.size(); ++i) {
    if (!(out.distance[i] > 0.0)) return out;
    t.push_back(times[i]);
    logd.push_back(std::log(out.distance[i]));
  }
  if (t.size() >= 2) out.rate = ls_slope(t, logd);
  return out;
}

struct AbsorbingEstimate {
  double radius = 0.0;
  bool still_growing = false;  // sup attained at the final record of some sample
  std::vector<double> per_sample;
};

inline AbsorbingEstimate estimate_absorbing_radius(const FourierField& f, const SpectralParams& params,
                                                   const SimConfig& cfg, int samples,
                                                   double transient_fraction = 0.5) {
  if (samples < 1) throw InvalidRange("estimate_absorbing_radius: samples must be >= 1");
  if (!(transient_fraction >= 0.0 && transient_fraction < 1.0))
    throw InvalidRange("estimate_absorbing_radius: transient fraction must lie in [0, 1)");
  Rng rng(cfg.seed);
  AbsorbingEstimate out;
  const std::int64_t n = cfg.steps();
  const auto first = static_cast<std::int64_t>(std::floor(transient_fraction * static_cast<double>(n + 1)));
  for (int k = 0; k < samples; ++k) {
    FourierField u = random_field(params.M, 1.0, rng);
    const double nu0 = sobolev_norm(u, params.ball_index());
    if (nu0 > 0.0) u = (cfg.init_norm / nu0) * u;
    double sup = 0.0;
    std::int64_t arg = first;
    for (std::int64_t i = 0; i <= n; ++i) {
      if (i > 0) u = step(u, f, params, cfg);
      if (i < first) continue;
      const double h = sobolev_norm(u, params.ball_index());
      if (h > sup) {
        sup = h;
        arg = i;
      }
    }
    out.per_sample.push_back(sup);
    out.radius = std::max(out.radius, sup);
    if (arg == n && n > first) out.still_growing = true;
  }
  return out;
}

// u + delta w, w a random unit field on the eigenvalues lambda_j in [band_lo, band_hi].
inline FourierField perturbed_partner(const FourierField& u, double band_lo, double band_hi, double delta, Rng& rng) {
  std::vector<LatticePoint> support;
  for (const auto& j : positive_half_modes(u.M())) {
    const auto l = static_cast<double>(j.norm2());
    if (band_lo <= l && l <= band_hi) support.push_back(j);
  }
  if (support.empty()) throw InvalidRange("perturbed_partner: no modes in the perturbation band");
  const FourierField w = random_field_on(u.M(), support, 0.0, rng);
  return axpy(u, delta / std::sqrt(norm2(w)), w);
}

}  // namespace hyperim

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hyperim/averaging.hpp"
#include "hyperim/config.hpp"
#include "hyperim/dynamics.hpp"
#include "hyperim/pipeline.hpp"
#include "hyperim/stats.hpp"
#include "hyperim/truncation.hpp"

using namespace hyperim;
namespace fs = std::filesystem;

namespace {

constexpr double kS = 0.15;
const std::vector<double> kMus{1e4, 1e5, 1e6};

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& s) {
    if (pass) detail += (detail.empty() ? "" : "; ") + s;
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SpectralParams params_at(int M) {
  SpectralParams p;
  p.M = M;
  return p;
}

double rel(const FourierField& a, const FourierField& b) {
  const double s = std::max(std::sqrt(norm2(a)), std::sqrt(norm2(b)));
  return s == 0.0 ? 0.0 : std::sqrt(norm2(a - b)) / s;
}

FourierField scaled_to(const FourierField& u, const SpectralParams& p, double target) {
  return (target / sobolev_norm(u, p.ball_index())) * u;
}

FourierField divergence_free_mode(int M, LatticePoint j, Complex a) {
  FourierField u(M);
  const double nj = norm(j);
  u.set_real_pair(j, {a * (-double(j.j2) / nj), a * (double(j.j1) / nj)});
  return u;
}

// Every mode in the transition band of the cutoff, where W' is nontrivial.
FourierField transition_field(int M, const SpectralParams& p, Rng& rng, std::int64_t support_cut) {
  std::uniform_real_distribution<double> mag(1.2, CutoffProfile::standard().outer_radius() - 0.2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  FourierField u(M);
  for (const auto& j : positive_half_modes(M)) {
    if (sup_norm(j) > support_cut) continue;
    const Complex z = std::polar(mag(rng), phase(rng)) * p.rho / std::pow(norm(j), p.ball_index());
    u.set_real_pair(j, {z * (-double(j.j2) / norm(j)), z * (double(j.j1) / norm(j))});
  }
  return u;
}

// P_sigma((u . grad) v) by a double loop over mode pairs, no dealiasing.
FourierField oracle_B(const FourierField& u, const FourierField& v) {
  std::map<LatticePoint, Vec2c> acc;
  const int M = u.M();
  for (const auto& p : u.modes())
    for (const auto& q : v.modes()) {
      const LatticePoint n{p.j.j1 + q.j.j1, p.j.j2 + q.j.j2};
      if ((n.j1 == 0 && n.j2 == 0) || std::max(std::abs(n.j1), std::abs(n.j2)) > M) continue;
      const Complex w = Complex(0, 1) * (p.c.x * double(q.j.j1) + p.c.y * double(q.j.j2));
      acc[n].x += w * q.c.x;
      acc[n].y += w * q.c.y;
    }
  FourierField out(M);
  for (auto& [n, c] : acc) {
    const double a = double(n.j1), b = double(n.j2), n2 = a * a + b * b;
    out.set(n, {(b * b * c.x - a * b * c.y) / n2, (-a * b * c.x + a * a * c.y) / n2});
  }
  return out;
}

// Shared state: the certified annuli from criterion 1 feed criteria 8 and 9.
std::map<double, SparseAnnulus> g_annuli;

Outcome sparse_annulus_certification() {
  Outcome o;
  for (double mu : kMus) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto a = find_sparse_annulus(mu, kS);
    const double secs = seconds_since(t0);
    if (!a) {
      o.require(false, "no annulus at mu=" + fmt("%g", mu));
      continue;
    }
    // brute-force oracle: enumerate the closed window independently, then all pairs
    const auto w = a->window();
    std::set<std::pair<std::int64_t, std::int64_t>> found, stored;
    const auto R = static_cast<std::int64_t>(std::sqrt(double(w.hi))) + 1;
    for (std::int64_t x = -R; x <= R; ++x)
      for (std::int64_t y = -R; y <= R; ++y)
        if (x * x + y * y >= w.lo && x * x + y * y <= w.hi) found.insert({x, y});
    for (const auto& p : a->points) stored.insert({p.j1, p.j2});
    o.require(found == stored, "point set mismatch at mu=" + fmt("%g", mu));
    const double thr = std::max(std::pow(mu, kS / 2.0), std::pow(a->lambda, kS / 2.0));
    double dmin = 1e300;
    const std::vector<std::pair<std::int64_t, std::int64_t>> v(found.begin(), found.end());
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t k = i + 1; k < v.size(); ++k)
        dmin = std::min(dmin, std::hypot(double(v[i].first - v[k].first), double(v[i].second - v[k].second)));
    o.require(dmin > thr, "pair too close at mu=" + fmt("%g", mu));
    o.require(secs <= 60.0, "search too slow at mu=" + fmt("%g", mu));
    g_annuli[mu] = *a;
    o.note(fmt("mu=%g", mu) + fmt(": lambda=%.6g", a->lambda) + fmt(" points=%g", double(v.size())) +
           fmt(" dmin/thr=%.3g", dmin / thr) + fmt(" %.2fs", secs));
  }
  return o;
}

Outcome strip_trend() {
  Outcome o;
  std::vector<double> mus, hits;
  for (double mu : kMus) {
    const auto st = strip_statistics(mu, kS);
    mus.push_back(mu);
    hits.push_back(double(st.lattice_hits));
  }
  const double slope = loglog_slope(mus, hits);
  o.require(slope <= 3.0 * kS + 0.15, fmt("slope %.4f above limit", slope));
  o.note(fmt("hits=%g", hits[0]) + fmt(",%g", hits[1]) + fmt(",%g", hits[2]) + fmt(" slope=%.4f", slope) +
         fmt(" limit=%.2f", 3.0 * kS + 0.15));
  return o;
}

Outcome record_gap_sequence() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = record_gaps(1000000);
  const double secs = seconds_since(t0);
  o.require(!r.empty(), "no records");
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i > 0) o.require(r[i].gap > r[i - 1].gap, "records not strictly increasing");
    o.require(r[i].gap == r[i].upper - r[i].lower, "gap field inconsistent");
    o.require(is_representable(r[i].lower) && is_representable(r[i].upper), "endpoint not a sum of two squares");
    for (std::int64_t n = r[i].lower + 1; n < r[i].upper; ++n)
      o.require(!is_representable(n), "interior sum of two squares at " + std::to_string(n));
  }
  o.require(secs <= 10.0, fmt("record_gaps took %.2fs", secs));
  if (!r.empty())
    o.note(fmt("records=%g", double(r.size())) + " largest " + std::to_string(r.back().lower) + "->" +
           std::to_string(r.back().upper) + fmt(" (%.3fs)", secs));
  return o;
}

Outcome spectral_identities() {
  Outcome o;
  Rng rng(4);
  std::normal_distribution<double> g;
  double idem = 0.0, skew = 0.0, conv = 0.0;
  for (int M : {8, 16}) {
    for (int t = 0; t < 100; ++t) {
      FourierField w(M);
      for (const auto& j : positive_half_modes(M)) w.set_real_pair(j, {Complex(g(rng), g(rng)), Complex(g(rng), g(rng))});
      const auto p = leray_project(w);
      idem = std::max(idem, rel(leray_project(p), p));
      const auto u = random_field(M, 1.0, rng), v = random_field(M, 1.0, rng);
      const double scale = std::sqrt(sobolev_norm2(u, 0) * sobolev_norm2(v, 1) * sobolev_norm2(v, 0));
      skew = std::max(skew, std::abs(trilinear_b(u, v, v)) / scale);
      if (M == 8) conv = std::max(conv, rel(bilinear_B(u, v, {.dealias = false}), oracle_B(u, v)));
    }
  }
  o.require(idem <= 1e-14, fmt("Leray idempotence %.3g", idem));
  o.require(skew <= 1e-10, fmt("b(u,v,v) %.3g", skew));
  o.require(conv <= 1e-12, fmt("pseudo-spectral vs direct %.3g", conv));
  o.note(fmt("idempotence=%.2g", idem) + fmt(" b(u,v,v)=%.2g", skew) + fmt(" B-vs-oracle=%.2g", conv));
  return o;
}

Outcome power_gap_inequality() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lg(-3.0, 6.0), bb(1.0, 3.0), frac(0.0, 1.0);
  int violations = 0;
  for (int t = 0; t < 100000; ++t) {
    const double a = std::pow(10.0, lg(rng));
    const double b = (t % 10 == 0) ? 0.0 : a * frac(rng);
    const auto r = power_gap_lower_bound(a, b, bb(rng));
    if (r.lhs < r.rhs * (1 - 1e-12)) ++violations;
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  o.note("100000 triples, 0 violations");
  return o;
}

Outcome truncation_contracts() {
  Outcome o;
  const auto p = params_at(8);
  Rng rng(6);
  std::uniform_real_distribution<double> frac(0.0, 1.0), lg(1.0, 6.0);
  double ident = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto u = scaled_to(random_field(8, 1.0, rng), p, frac(rng) * p.rho);
    ident = std::max(ident, rel(apply_W(u, p), u));
  }
  double supW = 0.0, supF = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto u = scaled_to(random_field(8, 1.0, rng), p, std::pow(10.0, lg(rng)) * p.rho);
    supW = std::max(supW, sobolev_norm(apply_W(u, p), 2.0));
    supF = std::max(supF, sobolev_norm(nonlinearity_F(u, p), 2.0));
  }
  const double bw = w_h2_bound(p, 8), bf = f_h2_bound(p, 8);
  o.require(ident <= 1e-15, fmt("W(u) != u inside ball, rel %.3g", ident));
  o.require(supW <= bw, fmt("sup |W|_H2 %.4g", supW) + fmt(" > %.4g", bw));
  o.require(supF <= bf, fmt("sup |F|_H2 %.4g", supF) + fmt(" > %.4g", bf));
  o.note(fmt("W identity=%.2g", ident) + fmt(" |W|_H2 %.3g", supW) + fmt("<=%.3g", bw) + fmt(" |F|_H2 %.3g", supF) +
         fmt("<=%.3g", bf));
  return o;
}

Outcome gateaux_checks() {
  Outcome o;
  const auto p = params_at(8);
  Rng rng(7);
  const std::vector<double> hs{1e-2, 1e-3, 1e-4};
  {
    const auto u = transition_field(8, p, rng, 8);
    auto v = random_field(8, 0.0, rng);
    v = (1.0 / std::sqrt(norm2(v))) * v;
    const auto wu = apply_W(u, p);
    const auto d = apply_W_prime(u, v, p);
    std::vector<double> errs;
    for (double h : hs) errs.push_back(std::sqrt(norm2((1.0 / h) * (apply_W(axpy(u, h, v), p) - wu) - d)));
    const double slope = loglog_slope(hs, errs);
    o.require(std::abs(slope - 1.0) <= 0.1, fmt("W' slope %.3f", slope));
    o.note(fmt("W' slope=%.3f", slope));
  }
  {
    const auto u = transition_field(8, p, rng, 5);
    auto v = random_field(8, 0.0, rng);
    v = (1.0 / std::sqrt(norm2(v))) * v;
    const auto fu = nonlinearity_F(u, p);
    const auto d = nonlinearity_F_prime(u, v, p);
    std::vector<double> errs;
    for (double h : hs) errs.push_back(std::sqrt(norm2((1.0 / h) * (nonlinearity_F(axpy(u, h, v), p) - fu) - d)));
    const double slope = loglog_slope(hs, errs);
    o.require(std::abs(slope - 1.0) <= 0.1, fmt("F' slope %.3f", slope));
    o.note(fmt("F' slope=%.3f", slope));
  }
  std::uniform_real_distribution<double> lg(-1.0, 2.0);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto u = scaled_to(random_field(8, 1.0, rng), p, std::pow(10.0, lg(rng)) * p.rho);
    const auto v = random_field(8, 0.5, rng), w = random_field(8, 0.5, rng);
    const double strong = inner(nonlinearity_F_prime(u, v, p, {.dealias = false}), w).real();
    const double weak = nonlinearity_F_prime_weak(u, v, w, p);
    worst = std::max(worst, std::abs(strong - weak) / std::max(std::abs(weak), 1e-300));
  }
  o.require(worst <= 1e-10, fmt("strong vs weak %.3g", worst));
  o.note(fmt("strong-vs-weak=%.2g", worst));
  return o;
}

Outcome cancellation() {
  Outcome o;
  if (g_annuli.size() != kMus.size()) {
    o.require(false, "annuli from criterion 1 unavailable");
    return o;
  }
  for (const auto& [mu, a] : g_annuli) {
    const auto win = a.window();
    const int M = averaging_truncation(win);
    const double r = std::pow(a.lambda, a.s / 2.0);
    std::vector<LatticePoint> low, mid;
    for (const auto& j : positive_half_modes(static_cast<int>(r)))
      if (static_cast<double>(j.norm2()) <= r * r) low.push_back(j);
    for (const auto& j : a.points)
      if (is_positive_half(j)) mid.push_back(j);
    Rng rng(8);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t)
      worst = std::max(worst, cancellation_residual(random_field_on(M, low, 0.0, rng),
                                                    random_field_on(M, mid, 0.0, rng), win));
    o.require(worst <= 1e-13, fmt("residual %.3g", worst) + fmt(" at mu=%g", mu));
    o.note(fmt("mu=%g", mu) + fmt(": r=%.3f", r) + fmt(" residual=%.2g", worst));
  }
  return o;
}

Outcome averaging_trend() {
  Outcome o;
  if (g_annuli.size() != kMus.size()) {
    o.require(false, "annuli from criterion 1 unavailable");
    return o;
  }
  SpectralParams p;
  p.s = kS;
  std::vector<double> lams, norms;
  int passes = 0, total = 0;
  for (const auto& [mu, a] : g_annuli) {
    const auto limit = static_cast<std::int64_t>(std::ceil(a.lambda * 1.1)) + 100;
    const double lambda_N = choose_cutoff(eigenvalues_with_multiplicity(limit), a, 1.0).lambda_N;
    const double r = std::pow(lambda_N, kS / 2.0);
    const auto samples = averaging_samples(a.window(), r, p, 20, 9);
    const auto rep = check_averaging(samples, a, lambda_N, p);
    lams.push_back(lambda_N);
    norms.push_back(rep.max_norm);
    for (const auto& s : rep.samples) {
      passes += s.pass;
      ++total;
    }
    o.note(fmt("lambda_N=%g", lambda_N) + fmt(" max=%.3g", rep.max_norm) + fmt(" bound=%.3g", rep.bound));
  }
  const double slope = loglog_slope(lams, norms);
  o.require(total >= 60, "fewer than 20 samples per annulus");
  o.require(slope <= -kS / 2.0 + 0.1, fmt("slope %.3f above limit", slope));
  o.note(fmt("slope=%.3f", slope) + fmt(" limit=%.3f", -kS / 2.0 + 0.1) + " per-sample bound met " +
         std::to_string(passes) + "/" + std::to_string(total));
  return o;
}

Outcome cone_integrity() {
  Outcome o;
  {
    const auto p = params_at(6);
    Rng rng(16);
    const auto u1 = scaled_to(random_field(6, 1.0, rng), p, 4.0);
    const auto u2 = perturbed_partner(u1, 5.0, 20.0, 1e-1, rng);
    const double t_star = 0.02;
    std::vector<double> dts{4e-3, 2e-3, 1e-3}, errs;
    for (double dt : dts) {
      SimConfig cfg;
      cfg.dt = dt;
      cfg.T = t_star + dt;
      const auto tr = evolve_pair(u1, u2, FourierField(6), p, cfg, {10.0, 13.0});
      const auto i = static_cast<std::size_t>(std::llround(t_star / dt));
      errs.push_back(std::abs((tr.records[i + 1].V - tr.records[i - 1].V) / (2.0 * dt) - tr.records[i].dVdt));
    }
    const double slope = loglog_slope(dts, errs);
    o.require(std::abs(slope - 2.0) <= 0.2, fmt("dV/dt slope %.3f", slope));
    o.note(fmt("dV/dt slope=%.3f", slope));
  }
  {
    const auto p = params_at(6);
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 0.02;
    cfg.nonlinear = false;
    const auto u1 = divergence_free_mode(6, {3, 2}, {0.4, 0.1});
    const auto tr = evolve_pair(u1, FourierField(6), FourierField(6), p, cfg, {10.0, 13.0});
    const double lq = std::pow(13.0, p.beta), V0 = norm2(u1);
    double worst = 0.0;
    for (const auto& r : tr.records) {
      const double exact = V0 * std::exp(-2.0 * p.nu * lq * r.t);
      worst = std::max(worst, std::abs(r.V - exact) / exact);
    }
    o.require(worst <= 1e-8, fmt("linear decay rel %.3g", worst));
    o.note(fmt("linear decay rel=%.2g", worst));
  }
  {
    const auto p = params_at(8);
    const auto u0 = sine_shear(8, 1.0);
    const auto f = p.nu * u0;
    double worst = 0.0;
    for (auto integ : {Integrator::integrating_factor_rk4, Integrator::imex_ars222}) {
      SimConfig cfg;
      cfg.dt = 1e-2;
      cfg.integrator = integ;
      auto u = u0;
      for (int n = 0; n < 100; ++n) u = step(u, f, p, cfg);
      worst = std::max(worst, max_abs_diff(u, u0));
    }
    o.require(worst <= 1e-10, fmt("shear residual %.3g", worst));
    o.note(fmt("shear residual=%.2g", worst));
  }
  return o;
}

std::map<std::string, std::string> bundle_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome determinism() {
  Outcome o;
  const KeyValues kv{{"mu", "10000"},
                     {"beta", "1.45"},
                     {"seed", "7"},
                     {"gaps_limit", "100000"},
                     {"stages", "gaps,annulus,sparse,strips,cutoff,simulate,cone,averaging,absorbing"},
                     {"force_cone", "true"},
                     {"T", "0.005"},
                     {"dt", "0.001"}};
  const auto cfg = resolve_config(kv, {}, [](const std::string&) { return std::optional<std::string>{}; });
  const fs::path base = fs::temp_directory_path() / ("hyperim-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(base);
  const auto now = std::chrono::system_clock::now();
  const auto d1 = make_run_directory(base, "pipeline", now);
  const auto d2 = make_run_directory(base, "pipeline", now);
  const auto r1 = run_pipeline(cfg, d1);
  const auto r2 = run_pipeline(cfg, d2);
  const auto b1 = bundle_contents(d1), b2 = bundle_contents(d2);
  o.require(r1.exit_code == 0 && r2.exit_code == 0, "pipeline reported a stage error");
  o.require(b1.size() >= 8, "bundle incomplete");
  o.require(b1 == b2, "bundles differ");
  std::size_t bytes = 0;
  for (const auto& [k, v] : b1) bytes += v.size();
  o.note(std::to_string(b1.size()) + " files, " + std::to_string(bytes) + " bytes identical");
  fs::remove_all(base);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"sparse annulus certification", sparse_annulus_certification},
      {"strip cardinality trend", strip_trend},
      {"record gaps", record_gap_sequence},
      {"spectral identities", spectral_identities},
      {"power gap inequality", power_gap_inequality},
      {"W and F contracts", truncation_contracts},
      {"Gateaux checks", gateaux_checks},
      {"cancellation mechanism", cancellation},
      {"averaging trend", averaging_trend},
      {"cone diagnostic integrity", cone_integrity},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %2zu %s [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}

#pragma once

// Lattice points of Z^2, sums of two squares, and the sparse-annulus search.
//
// All membership tests compare the integer |j|^2 against integer windows
// derived from real bounds (n >= x  <=>  n >= ceil(x), n <= x  <=>  n <= floor(x)),
// so no lattice point is classified by a floating-point comparison.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperim/error.hpp"

namespace hyperim {

struct LatticePoint {
  std::int64_t j1 = 0;
  std::int64_t j2 = 0;

  constexpr std::int64_t norm2() const { return j1 * j1 + j2 * j2; }
  constexpr bool is_zero() const { return j1 == 0 && j2 == 0; }
  constexpr LatticePoint operator-() const { return {-j1, -j2}; }
  constexpr friend LatticePoint operator+(LatticePoint a, LatticePoint b) {
    return {a.j1 + b.j1, a.j2 + b.j2};
  }
  constexpr friend LatticePoint operator-(LatticePoint a, LatticePoint b) {
    return {a.j1 - b.j1, a.j2 - b.j2};
  }
  constexpr friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

constexpr std::int64_t dot(LatticePoint a, LatticePoint b) { return a.j1 * b.j1 + a.j2 * b.j2; }
inline double norm(LatticePoint j) { return std::sqrt(static_cast<double>(j.norm2())); }

// floor(sqrt(n)) without floating-point drift.
inline std::int64_t isqrt(std::int64_t n) {
  if (n <= 0) return 0;
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

// ceil(sqrt(n)) for n >= 0.
inline std::int64_t ceil_sqrt(std::int64_t n) {
  if (n <= 0) return 0;
  const std::int64_t r = isqrt(n);
  return r * r == n ? r : r + 1;
}

// Closed integer window lo <= n <= hi on the squared norm.
struct NormWindow {
  std::int64_t lo = 1;
  std::int64_t hi = 0;

  bool empty() const { return hi < lo; }
  bool contains(std::int64_t n) const { return lo <= n && n <= hi; }

  // {x : a <= |x|^2 <= b}
  static NormWindow closed(double a, double b) {
    return {static_cast<std::int64_t>(std::ceil(a)), static_cast<std::int64_t>(std::floor(b))};
  }
  // {x : a < |x|^2 <= b}
  static NormWindow half_open(double a, double b) {
    return {static_cast<std::int64_t>(std::floor(a)) + 1, static_cast<std::int64_t>(std::floor(b))};
  }
};

// All j != 0 with |j|^2 in the window, lexicographic (j1, then j2) order.
inline std::vector<LatticePoint> shell_points(NormWindow w) {
  std::vector<LatticePoint> out;
  const std::int64_t lo = std::max<std::int64_t>(w.lo, 1);
  if (w.hi < lo) return out;
  const std::int64_t radius = isqrt(w.hi);
  for (std::int64_t a = -radius; a <= radius; ++a) {
    const std::int64_t a2 = a * a;
    const std::int64_t bmax = isqrt(w.hi - a2);
    const std::int64_t bmin = ceil_sqrt(std::max<std::int64_t>(lo - a2, 0));
    if (bmin > bmax) continue;
    for (std::int64_t b = -bmax; b <= -bmin; ++b) out.push_back({a, b});
    for (std::int64_t b = std::max<std::int64_t>(bmin, 1); b <= bmax; ++b)
      out.push_back({a, b});
  }
  return out;
}

inline bool is_representable(std::int64_t n) {
  if (n < 0) throw DomainError("is_representable: n must be nonnegative");
  for (std::int64_t a = 0; 2 * a * a <= n; ++a) {
    const std::int64_t rest = n - a * a;
    const std::int64_t b = isqrt(rest);
    if (b * b == rest) return true;
  }
  return false;
}

// representable[n] for 0 <= n <= limit, by marking a^2 + b^2.
inline std::vector<bool> representable_sieve(std::int64_t limit) {
  std::vector<bool> mark(static_cast<std::size_t>(std::max<std::int64_t>(limit, 0)) + 1, false);
  for (std::int64_t a = 0; a * a <= limit; ++a)
    for (std::int64_t b = a; a * a + b * b <= limit; ++b) mark[static_cast<std::size_t>(a * a + b * b)] = true;
  return mark;
}

struct EigenvalueCount {
  std::int64_t eigenvalue = 0;
  std::int64_t multiplicity = 0;
  friend bool operator==(const EigenvalueCount&, const EigenvalueCount&) = default;
};

// Distinct eigenvalues of -Laplacian on the 2pi-periodic torus in [1, limit],
// each with the number of lattice points on its circle.
inline std::vector<EigenvalueCount> eigenvalues_with_multiplicity(std::int64_t limit) {
  if (limit < 1) throw InvalidRange("eigenvalues_with_multiplicity: limit must be >= 1");
  std::vector<std::int64_t> count(static_cast<std::size_t>(limit) + 1, 0);
  const std::int64_t r = isqrt(limit);
  for (std::int64_t a = -r; a <= r; ++a) {
    const std::int64_t bmax = isqrt(limit - a * a);
    for (std::int64_t b = -bmax; b <= bmax; ++b) ++count[static_cast<std::size_t>(a * a + b * b)];
  }
  std::vector<EigenvalueCount> out;
  for (std::int64_t n = 1; n <= limit; ++n)
    if (count[static_cast<std::size_t>(n)] > 0) out.push_back({n, count[static_cast<std::size_t>(n)]});
  return out;
}

struct GapRecord {
  std::int64_t lower = 0;
  std::int64_t upper = 0;
  std::int64_t gap = 0;
  friend bool operator==(const GapRecord&, const GapRecord&) = default;
};

// Record gaps between consecutive sums of two squares in [1, limit]. Adjacent
// integers (gap 1) are the baseline, so the first record is 2 -> 4.
inline std::vector<GapRecord> record_gaps(std::int64_t limit) {
  if (limit < 2) throw InvalidRange("record_gaps: limit must be >= 2");
  const auto mark = representable_sieve(limit);
  std::vector<GapRecord> out;
  std::int64_t best = 1;
  std::int64_t prev = 1;
  for (std::int64_t n = 2; n <= limit; ++n) {
    if (!mark[static_cast<std::size_t>(n)]) continue;
    if (n - prev > best) {
      best = n - prev;
      out.push_back({prev, n, best});
    }
    prev = n;
  }
  return out;
}

inline std::vector<LatticePoint> annulus_points(double lambda, double k) {
  if (!(k >= 0.0)) throw InvalidRange("annulus_points: k must be nonnegative");
  if (!(lambda > k)) throw InvalidRange("annulus_points: lambda must exceed k");
  return shell_points(NormWindow::closed(lambda - k, lambda + k));
}

// Smallest squared distance over distinct pairs; O(n^2).
inline std::optional<std::int64_t> min_pairwise_distance2(std::span<const LatticePoint> pts) {
  if (pts.size() < 2) return std::nullopt;
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) best = std::min(best, (pts[a] - pts[b]).norm2());
  return best;
}

inline std::optional<double> min_pairwise_distance(std::span<const LatticePoint> pts) {
  const auto d2 = min_pairwise_distance2(pts);
  if (!d2) return std::nullopt;
  return std::sqrt(static_cast<double>(*d2));
}

inline void check_sparse_exponent(double s) {
  if (!(s > 0.0 && s < 1.0 / 6.0))
    throw InvalidExponent("exponent s must lie in (0, 1/6), got " + std::to_string(s));
}

// Disjoint half-open bins {mu + m kappa < |x|^2 <= mu + (m+1) kappa}, 0 <= m <= J.
struct AnnulusFamily {
  double mu = 0.0;
  double s = 0.0;
  double kappa = 0.0;
  std::int64_t J = 0;

  static AnnulusFamily make(double mu, double s) {
    check_sparse_exponent(s);
    if (!(mu >= 2.0)) throw InvalidRange("annulus family: mu must be >= 2");
    return {mu, s, std::pow(mu, s), static_cast<std::int64_t>(std::floor(std::sqrt(mu)))};
  }

  double lower(std::int64_t m) const { return mu + static_cast<double>(m) * kappa; }
  double upper(std::int64_t m) const { return mu + static_cast<double>(m + 1) * kappa; }
  NormWindow bin(std::int64_t m) const { return NormWindow::half_open(lower(m), upper(m)); }
  // Union of all bins.
  NormWindow hull() const { return NormWindow::half_open(mu, upper(J)); }
};

struct SparseAnnulus {
  double mu = 0.0;
  double s = 0.0;
  std::int64_t m0 = 0;
  double lambda = 0.0;
  double half_width = 0.0;
  double separation_threshold = 0.0;  // mu^{s/2}
  double lambda_threshold = 0.0;      // lambda^{s/2}
  std::vector<LatticePoint> points;   // closed annulus [lambda - half_width, lambda + half_width]
  std::optional<double> min_distance;

  double certified_threshold() const { return std::max(separation_threshold, lambda_threshold); }
  // Achieved constant in k >= C lambda^s.
  double width_ratio() const { return half_width / std::pow(lambda, s); }
  // Closed annulus; the bounds are formed exactly as the scan's bin bounds
  // (mu + m0 kappa, mu + (m0+1) kappa) so both agree on boundary points.
  NormWindow window() const {
    const double kappa = 2.0 * half_width;
    return NormWindow::closed(mu + static_cast<double>(m0) * kappa, mu + static_cast<double>(m0 + 1) * kappa);
  }
};

// Brute-force certificate: every stored point lies in the closed annulus and
// every distinct pair is farther apart than max(mu^{s/2}, lambda^{s/2}).
inline bool certify_sparse_annulus(const SparseAnnulus& a) {
  const NormWindow w = a.window();
  for (const auto& p : a.points)
    if (!w.contains(p.norm2())) return false;
  const double thr = a.certified_threshold();
  for (std::size_t x = 0; x < a.points.size(); ++x)
    for (std::size_t y = x + 1; y < a.points.size(); ++y)
      if (!(norm(a.points[x] - a.points[y]) > thr)) return false;
  return true;
}

namespace detail {
// True when some distinct pair has squared distance <= max_close2.
inline bool has_close_pair(std::span<const LatticePoint> pts, std::int64_t max_close2) {
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b)
      if ((pts[a] - pts[b]).norm2() <= max_close2) return true;
  return false;
}
}  // namespace detail

// Scans m = 0..J in ascending order and returns the first bin whose lattice
// points are pairwise farther apart than mu^{s/2}, re-certified on the closed
// annulus against max(mu^{s/2}, lambda^{s/2}). Empty when every bin fails,
// which happens for small mu.
inline std::optional<SparseAnnulus> find_sparse_annulus(double mu, double s) {
  const auto fam = AnnulusFamily::make(mu, s);
  const auto close2 = static_cast<std::int64_t>(std::floor(std::pow(mu, s)));
  for (std::int64_t m = 0; m <= fam.J; ++m) {
    const auto bin = shell_points(fam.bin(m));
    if (detail::has_close_pair(bin, close2)) continue;

    SparseAnnulus out;
    out.mu = mu;
    out.s = s;
    out.m0 = m;
    out.lambda = mu + (static_cast<double>(m) + 0.5) * fam.kappa;
    out.half_width = fam.kappa / 2.0;
    out.separation_threshold = std::pow(mu, s / 2.0);
    out.lambda_threshold = std::pow(out.lambda, s / 2.0);
    out.points = shell_points(out.window());
    // strict > threshold  <=>  d^2 >= floor(threshold^2) + 1
    const auto thr2 = static_cast<std::int64_t>(std::floor(std::pow(std::max(mu, out.lambda), s)));
    if (detail::has_close_pair(out.points, thr2)) continue;
    out.min_distance = min_pairwise_distance(out.points);
    if (!certify_sparse_annulus(out)) throw Error("find_sparse_annulus: certificate disagrees with scan");
    return out;
  }
  return std::nullopt;
}

struct StripStats {
  double mu = 0.0;
  double s = 0.0;
  std::int64_t strip_count = 0;
  std::int64_t lattice_hits = 0;
  std::int64_t annulus_points = 0;  // card(N^mu cap Z^2)
};

// Directions j with 0 < |j| <= mu^{s/2}.
inline std::vector<LatticePoint> strip_directions(double mu, double s) {
  const auto r2 = static_cast<std::int64_t>(std::floor(std::pow(mu, s)));
  if (r2 < 1) return {};
  return shell_points({1, r2});
}

inline bool in_strip_union(LatticePoint x, std::span<const LatticePoint> dirs, double width) {
  // |x.j| < width  <=>  |x.j| <= ceil(width) - 1
  const auto lim = static_cast<std::int64_t>(std::ceil(width)) - 1;
  for (const auto& j : dirs) {
    const std::int64_t d = dot(x, j);
    if (d <= lim && -d <= lim) return true;
  }
  return false;
}

inline StripStats strip_statistics(double mu, double s) {
  const auto fam = AnnulusFamily::make(mu, s);
  const auto dirs = strip_directions(mu, s);
  StripStats out{mu, s, static_cast<std::int64_t>(dirs.size()), 0, 0};
  const auto pts = shell_points(fam.hull());
  out.annulus_points = static_cast<std::int64_t>(pts.size());
  if (dirs.empty()) return out;
  for (const auto& x : pts)
    if (in_strip_union(x, dirs, fam.kappa)) ++out.lattice_hits;
  return out;
}

// Real bounds within 1e-9 of an integer, where the integer-window conversion
// is sensitive to rounding of mu, kappa, lambda.
inline std::vector<double> near_integer_bounds(std::span<const double> bounds, double tol = 1e-9) {
  std::vector<double> out;
  for (double b : bounds)
    if (std::abs(b - std::round(b)) < tol) out.push_back(b);
  return out;
}

}  // namespace hyperim

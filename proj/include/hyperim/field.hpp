#pragma once

// Truncated Fourier representation of a real, mean-zero, 2-component vector
// field on the torus [0, 2pi]^2:
//
//   u(x) = sum_{j != 0, |j|_inf <= M} u_j e^{i j.x},   u_{-j} = conj(u_j).
//
// Inner products use the normalized measure dx / (2pi)^2, so
// (u, v) = sum_j u_j . conj(v_j) over every stored mode.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hyperim/error.hpp"
#include "hyperim/lattice.hpp"

namespace hyperim {

using Complex = std::complex<double>;

struct Vec2c {
  Complex x{};
  Complex y{};

  Vec2c& operator+=(const Vec2c& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2c& operator-=(const Vec2c& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend Vec2c operator+(Vec2c a, const Vec2c& b) { return a += b; }
  friend Vec2c operator-(Vec2c a, const Vec2c& b) { return a -= b; }
  friend Vec2c operator*(double s, const Vec2c& a) { return {s * a.x, s * a.y}; }
  friend Vec2c operator*(Complex s, const Vec2c& a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2c&, const Vec2c&) = default;

  double norm2() const { return std::norm(x) + std::norm(y); }
  Vec2c conj() const { return {std::conj(x), std::conj(y)}; }
};

// sum_m a_m conj(b_m)
inline Complex cdot(const Vec2c& a, const Vec2c& b) { return a.x * std::conj(b.x) + a.y * std::conj(b.y); }

inline std::int64_t sup_norm(LatticePoint j) { return std::max(std::abs(j.j1), std::abs(j.j2)); }

// j1 > 0, or j1 == 0 and j2 > 0. Exactly one of j, -j qualifies for j != 0.
inline bool is_positive_half(LatticePoint j) { return j.j1 > 0 || (j.j1 == 0 && j.j2 > 0); }

struct Mode {
  LatticePoint j;
  Vec2c c;
};

class FourierField {
 public:
  FourierField() = default;
  explicit FourierField(int M) : M_(M) {
    if (M < 1) throw DomainError("FourierField: truncation radius must be >= 1");
  }

  // Builds from arbitrary (j, c) pairs; duplicates are summed, j = 0 is
  // rejected, and modes outside |j|_inf <= M are rejected.
  static FourierField from_modes(int M, std::vector<Mode> modes) {
    FourierField f(M);
    std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.j < b.j; });
    for (auto& m : modes) {
      f.check_index(m.j);
      if (!f.modes_.empty() && f.modes_.back().j == m.j)
        f.modes_.back().c += m.c;
      else
        f.modes_.push_back(m);
    }
    return f;
  }

  // Every j with 0 < |j|_inf <= M, coefficient zero.
  static FourierField zeros_full(int M) {
    FourierField f(M);
    f.modes_.reserve(static_cast<std::size_t>((2 * M + 1) * (2 * M + 1) - 1));
    for (std::int64_t a = -M; a <= M; ++a)
      for (std::int64_t b = -M; b <= M; ++b)
        if (a != 0 || b != 0) f.modes_.push_back({{a, b}, {}});
    return f;
  }

  int M() const { return M_; }
  std::size_t size() const { return modes_.size(); }
  bool empty() const { return modes_.empty(); }
  const std::vector<Mode>& modes() const { return modes_; }
  auto begin() const { return modes_.begin(); }
  auto end() const { return modes_.end(); }

  Vec2c at(LatticePoint j) const {
    auto it = find(j);
    return it == modes_.end() ? Vec2c{} : it->c;
  }
  bool contains(LatticePoint j) const { return find(j) != modes_.end(); }

  // Inserts or overwrites one coefficient.
  void set(LatticePoint j, const Vec2c& c) {
    check_index(j);
    auto it = std::lower_bound(modes_.begin(), modes_.end(), j,
                               [](const Mode& m, LatticePoint k) { return m.j < k; });
    if (it != modes_.end() && it->j == j)
      it->c = c;
    else
      modes_.insert(it, {j, c});
  }

  // Sets u_j and u_{-j} = conj(u_j).
  void set_real_pair(LatticePoint j, const Vec2c& c) {
    set(j, c);
    set(-j, c.conj());
  }

  // New field on the same support with coefficients f(j, c).
  template <class Fn>
  FourierField map(Fn&& fn) const {
    FourierField out(M_);
    out.modes_.reserve(modes_.size());
    for (const auto& m : modes_) out.modes_.push_back({m.j, fn(m.j, m.c)});
    return out;
  }

  // Keeps modes for which keep(j) holds.
  template <class Pred>
  FourierField filter(Pred&& keep) const {
    FourierField out(M_);
    for (const auto& m : modes_)
      if (keep(m.j)) out.modes_.push_back(m);
    return out;
  }

  bool is_real(double tol = 0.0) const {
    for (const auto& m : modes_) {
      const Vec2c d = at(-m.j) - m.c.conj();
      if (std::sqrt(d.norm2()) > tol * std::max(1.0, std::sqrt(m.c.norm2()))) return false;
      if (!contains(-m.j) && m.c.norm2() > 0.0) return false;
    }
    return true;
  }

  // max_j |j . u_j| / (|j| |u_j|), zero for the zero field.
  double divergence_defect() const {
    double worst = 0.0;
    for (const auto& m : modes_) {
      const double mag = std::sqrt(m.c.norm2());
      if (mag == 0.0) continue;
      const Complex d = static_cast<double>(m.j.j1) * m.c.x + static_cast<double>(m.j.j2) * m.c.y;
      worst = std::max(worst, std::abs(d) / (norm(m.j) * mag));
    }
    return worst;
  }
  bool is_divergence_free(double tol = 1e-12) const { return divergence_defect() <= tol; }

  bool all_finite() const {
    for (const auto& m : modes_)
      if (!std::isfinite(m.c.x.real()) || !std::isfinite(m.c.x.imag()) || !std::isfinite(m.c.y.real()) ||
          !std::isfinite(m.c.y.imag()))
        return false;
    return true;
  }

  friend bool operator==(const FourierField& a, const FourierField& b) {
    if (a.M_ != b.M_ || a.modes_.size() != b.modes_.size()) return false;
    for (std::size_t i = 0; i < a.modes_.size(); ++i)
      if (a.modes_[i].j != b.modes_[i].j || !(a.modes_[i].c == b.modes_[i].c)) return false;
    return true;
  }

 private:
  std::vector<Mode>::const_iterator find(LatticePoint j) const {
    auto it = std::lower_bound(modes_.begin(), modes_.end(), j,
                               [](const Mode& m, LatticePoint k) { return m.j < k; });
    return (it != modes_.end() && it->j == j) ? it : modes_.end();
  }
  void check_index(LatticePoint j) const {
    if (j.is_zero()) throw DomainError("FourierField: the zero mode is excluded (mean-zero fields)");
    if (sup_norm(j) > M_) throw DomainError("FourierField: mode outside truncation |j|_inf <= M");
  }

  int M_ = 0;
  std::vector<Mode> modes_;  // strictly increasing in j
};

namespace detail {
// Merge of two sorted supports, out_j = fa(a_j) + fb(b_j).
inline FourierField combine(const FourierField& a, const FourierField& b, double sa, double sb) {
  if (a.M() != b.M()) throw SizeMismatch("FourierField: truncation radii differ");
  std::vector<Mode> out;
  out.reserve(std::max(a.size(), b.size()));
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->j < ib->j)) {
      out.push_back({ia->j, sa * ia->c});
      ++ia;
    } else if (ia == a.end() || ib->j < ia->j) {
      out.push_back({ib->j, sb * ib->c});
      ++ib;
    } else {
      out.push_back({ia->j, sa * ia->c + sb * ib->c});
      ++ia;
      ++ib;
    }
  }
  return FourierField::from_modes(a.M(), std::move(out));
}
}  // namespace detail

inline FourierField operator+(const FourierField& a, const FourierField& b) { return detail::combine(a, b, 1.0, 1.0); }
inline FourierField operator-(const FourierField& a, const FourierField& b) { return detail::combine(a, b, 1.0, -1.0); }
inline FourierField operator*(double s, const FourierField& a) {
  return a.map([s](LatticePoint, const Vec2c& c) { return s * c; });
}
// a + s b
inline FourierField axpy(const FourierField& a, double s, const FourierField& b) { return detail::combine(a, b, 1.0, s); }

// (u, v) = sum_j u_j . conj(v_j), summed in lexicographic mode order.
inline Complex inner(const FourierField& u, const FourierField& v) {
  if (u.M() != v.M()) throw SizeMismatch("inner: truncation radii differ");
  Complex acc{};
  auto iu = u.begin(), iv = v.begin();
  while (iu != u.end() && iv != v.end()) {
    if (iu->j < iv->j)
      ++iu;
    else if (iv->j < iu->j)
      ++iv;
    else {
      acc += cdot(iu->c, iv->c);
      ++iu;
      ++iv;
    }
  }
  return acc;
}

inline double norm2(const FourierField& u) {
  double acc = 0.0;
  for (const auto& m : u) acc += m.c.norm2();
  return acc;
}

inline double max_abs_diff(const FourierField& a, const FourierField& b) {
  const FourierField d = a - b;
  double worst = 0.0;
  for (const auto& m : d) worst = std::max(worst, std::sqrt(m.c.norm2()));
  return worst;
}

// ---------------------------------------------------------------------------
// Snapshot CSV: header j1,j2,re_u1,im_u1,re_u2,im_u2; positive-half modes only.

inline std::string snapshot_csv(const FourierField& u) {
  std::string out = "j1,j2,re_u1,im_u1,re_u2,im_u2\n";
  char buf[256];
  for (const auto& m : u) {
    if (!is_positive_half(m.j)) continue;
    std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(m.j.j1),
                  static_cast<long long>(m.j.j2), m.c.x.real(), m.c.x.imag(), m.c.y.real(), m.c.y.imag());
    out += buf;
  }
  return out;
}

// Restores the conjugate half from the reality invariant.
inline FourierField parse_snapshot_csv(const std::string& text, int M) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("j1,j2,re_u1,im_u1,re_u2,im_u2", 0) != 0)
    throw ValidationError("snapshot: missing or wrong header");
  std::vector<Mode> modes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    long long a = 0, b = 0;
    double r1 = 0, i1 = 0, r2 = 0, i2 = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lf,%lf,%lf,%lf", &a, &b, &r1, &i1, &r2, &i2) != 6)
      throw ValidationError("snapshot: malformed row '" + line + "'");
    const LatticePoint j{a, b};
    if (!is_positive_half(j)) throw ValidationError("snapshot: row outside the positive half");
    const Vec2c c{{r1, i1}, {r2, i2}};
    modes.push_back({j, c});
    modes.push_back({-j, c.conj()});
  }
  return FourierField::from_modes(M, std::move(modes));
}

// ---------------------------------------------------------------------------
// Random data.

using Rng = std::mt19937_64;

inline Complex gaussian_complex(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double re = g(rng);
  const double im = g(rng);
  return {re, im};
}

// Random real divergence-free field on the given positive-half support,
// amplitude |j|^{-decay} per mode. Modes are visited in the given order.
inline FourierField random_field_on(int M, const std::vector<LatticePoint>& positive_support, double decay, Rng& rng) {
  std::vector<Mode> modes;
  modes.reserve(2 * positive_support.size());
  for (const auto& j : positive_support) {
    if (!is_positive_half(j)) throw DomainError("random_field_on: support must lie in the positive half");
    // divergence-free direction is j_perp / |j|
    const double nj = norm(j);
    const Complex a = gaussian_complex(rng) * std::pow(nj, -decay);
    const Vec2c c{a * (-static_cast<double>(j.j2) / nj), a * (static_cast<double>(j.j1) / nj)};
    modes.push_back({j, c});
    modes.push_back({-j, c.conj()});
  }
  return FourierField::from_modes(M, std::move(modes));
}

inline std::vector<LatticePoint> positive_half_modes(int M) {
  std::vector<LatticePoint> out;
  for (std::int64_t a = 0; a <= M; ++a)
    for (std::int64_t b = -M; b <= M; ++b)
      if (is_positive_half({a, b})) out.push_back({a, b});
  return out;
}

// Random real divergence-free field on every mode |j|_inf <= M.
inline FourierField random_field(int M, double decay, Rng& rng) {
  return random_field_on(M, positive_half_modes(M), decay, rng);
}

}  // namespace hyperim

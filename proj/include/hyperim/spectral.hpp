#pragma once

// Leray projection, powers of the Stokes operator A = -Laplacian, Sobolev
// norms, eigenvalue-window projectors, and the convection forms
//
//   B(u, v) = P_sigma((u . grad) v),   b(u, v, w) = ((u . grad) v, w).

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hyperim/error.hpp"
#include "hyperim/fft.hpp"
#include "hyperim/field.hpp"
#include "hyperim/lattice.hpp"

namespace hyperim {

struct SpectralParams {
  double beta = 1.45;
  double nu = 1.0;
  int M = 16;
  double s = (3.0 - 2.0 * 1.45 + 1.0 / 6.0) / 2.0;
  double rho = 1.0;

  double epsilon() const { return 2.0 * beta - 17.0 / 6.0; }
  // Regularity index of the absorbing ball, 3 + epsilon.
  double ball_index() const { return 3.0 + epsilon(); }
  bool supercritical() const { return beta < 1.5; }

  // Throws ValidationError naming the first violated constraint.
  void validate(bool cone_checks) const {
    if (!(beta > 17.0 / 12.0))
      throw ValidationError("beta must exceed 17/12 (got " + std::to_string(beta) + ")");
    if (!(epsilon() > 0.0)) throw ValidationError("epsilon = 2 beta - 17/6 must be positive");
    if (!(nu > 0.0)) throw ValidationError("nu must be positive");
    if (!(rho > 0.0)) throw ValidationError("rho must be positive");
    if (M < 2) throw ValidationError("truncation radius M must be >= 2");
    if (cone_checks && !(s > 3.0 - 2.0 * beta && s < 1.0 / 6.0))
      throw ValidationError("s must lie in (3 - 2 beta, 1/6) for cone/averaging checks (got " + std::to_string(s) +
                            ")");
  }
};

// ---------------------------------------------------------------------------
// Diagonal operators.

// P_j = |j|^{-2} [[j2^2, -j1 j2], [-j1 j2, j1^2]]
inline Vec2c leray_matrix_apply(LatticePoint j, const Vec2c& c) {
  const auto a = static_cast<double>(j.j1);
  const auto b = static_cast<double>(j.j2);
  const double n2 = a * a + b * b;
  return {(b * b * c.x - a * b * c.y) / n2, (-a * b * c.x + a * a * c.y) / n2};
}

inline FourierField leray_project(const FourierField& w) {
  return w.map([](LatticePoint j, const Vec2c& c) { return leray_matrix_apply(j, c); });
}

// Multiplies u_j by (|j|^2)^p: A^{beta/2} is p = beta/2, A^{-1/2} is p = -1/2.
inline FourierField apply_A_power(const FourierField& u, double p) {
  if (p == 0.0) return u;
  return u.map([p](LatticePoint j, const Vec2c& c) { return std::pow(static_cast<double>(j.norm2()), p) * c; });
}

// ||u||_{H^s}^2 = sum_j |j|^{2s} |u_j|^2
inline double sobolev_norm2(const FourierField& u, double s) {
  double acc = 0.0;
  for (const auto& m : u) acc += std::pow(static_cast<double>(m.j.norm2()), s) * m.c.norm2();
  return acc;
}
inline double sobolev_norm(const FourierField& u, double s) { return std::sqrt(sobolev_norm2(u, s)); }

// ---------------------------------------------------------------------------
// Eigenvalue-window projectors. Windows are defined by eigenvalue value
// lambda_j = |j|^2, never by index, so multiplicity classes are never split.

struct ModeProjector {
  enum class Kind { P_N, Q_N, P_low, Q_high, I_mid };
  Kind kind = Kind::P_N;
  double lambda_N = 0.0;
  double k = 0.0;

  bool keeps(LatticePoint j) const {
    const auto lj = static_cast<double>(j.norm2());
    switch (kind) {
      case Kind::P_N:
        return lj <= lambda_N;
      case Kind::Q_N:
        return lj > lambda_N;
      case Kind::P_low:
        return lj < lambda_N - k;
      case Kind::Q_high:
        return lj > lambda_N + k;
      case Kind::I_mid:
        return lambda_N - k <= lj && lj <= lambda_N + k;
    }
    return false;
  }

  static ModeProjector low(double lambda_N) { return {Kind::P_N, lambda_N, 0.0}; }
  static ModeProjector high(double lambda_N) { return {Kind::Q_N, lambda_N, 0.0}; }
  static ModeProjector below(double lambda_N, double k) { return {Kind::P_low, lambda_N, k}; }
  static ModeProjector above(double lambda_N, double k) { return {Kind::Q_high, lambda_N, k}; }
  static ModeProjector mid(double lambda_N, double k) { return {Kind::I_mid, lambda_N, k}; }
};

inline std::string to_string(ModeProjector::Kind k) {
  switch (k) {
    case ModeProjector::Kind::P_N:
      return "P_N";
    case ModeProjector::Kind::Q_N:
      return "Q_N";
    case ModeProjector::Kind::P_low:
      return "P_low";
    case ModeProjector::Kind::Q_high:
      return "Q_high";
    case ModeProjector::Kind::I_mid:
      return "I_mid";
  }
  return "?";
}

inline FourierField project(const FourierField& u, const ModeProjector& proj) {
  return u.filter([&](LatticePoint j) { return proj.keeps(j); });
}

// ---------------------------------------------------------------------------
// Convection products.

struct ProductOptions {
  bool dealias = true;  // 2/3 rule: zero |j|_inf > 2M/3 before and after the product
  bool direct = false;  // exact mode-pair convolution instead of transforms
};

namespace detail {

inline std::int64_t dealias_cut(int M) { return (2 * static_cast<std::int64_t>(M)) / 3; }

// Replaces u_j, u_{-j} by their Hermitian average so the result is exactly real.
inline FourierField symmetrize(const FourierField& f) {
  std::vector<Mode> out;
  out.reserve(f.size());
  for (const auto& m : f) {
    if (!is_positive_half(m.j)) continue;
    const Vec2c c = 0.5 * (m.c + f.at(-m.j).conj());
    out.push_back({m.j, c});
    out.push_back({-m.j, c.conj()});
  }
  for (const auto& m : f)
    if (!is_positive_half(m.j) && !f.contains(-m.j)) {
      const Vec2c c = 0.5 * m.c.conj();
      out.push_back({-m.j, c});
      out.push_back({m.j, c.conj()});
    }
  return FourierField::from_modes(f.M(), std::move(out));
}

inline std::map<LatticePoint, Vec2c> direct_convection(const FourierField& u, const FourierField& v,
                                                       std::int64_t in_cut, std::int64_t out_cut) {
  std::map<LatticePoint, Vec2c> acc;
  for (const auto& p : u) {
    if (sup_norm(p.j) > in_cut) continue;
    for (const auto& q : v) {
      if (sup_norm(q.j) > in_cut) continue;
      const LatticePoint n = p.j + q.j;
      if (n.is_zero() || sup_norm(n) > out_cut) continue;
      const Complex s = Complex(0.0, 1.0) * (p.c.x * static_cast<double>(q.j.j1) + p.c.y * static_cast<double>(q.j.j2));
      acc[n] += s * q.c;
    }
  }
  return acc;
}

inline FourierField spectral_convection(const FourierField& u, const FourierField& v, std::int64_t in_cut,
                                        std::int64_t out_cut) {
  const int n = fft_friendly_size(static_cast<int>(3 * in_cut + 1));
  const Fft2d& fft = fft_plan(n);
  GridBuffer u1(n), u2(n), d1v1(n), d2v1(n), d1v2(n), d2v2(n);
  const Complex I(0.0, 1.0);
  for (const auto& m : u) {
    if (sup_norm(m.j) > in_cut) continue;
    const auto at = u1.index(m.j);
    u1[at] = m.c.x;
    u2[at] = m.c.y;
  }
  for (const auto& m : v) {
    if (sup_norm(m.j) > in_cut) continue;
    const auto at = d1v1.index(m.j);
    const double a = static_cast<double>(m.j.j1);
    const double b = static_cast<double>(m.j.j2);
    d1v1[at] = I * a * m.c.x;
    d2v1[at] = I * b * m.c.x;
    d1v2[at] = I * a * m.c.y;
    d2v2[at] = I * b * m.c.y;
  }
  for (GridBuffer* g : {&u1, &u2, &d1v1, &d2v1, &d1v2, &d2v2}) fft.to_physical(*g);
  // reuse d1v1 / d1v2 for the two components of the product
  for (std::size_t i = 0; i < u1.size(); ++i) {
    const double a1 = u1[i].real(), a2 = u2[i].real();
    d1v1[i] = a1 * d1v1[i].real() + a2 * d2v1[i].real();
    d1v2[i] = a1 * d1v2[i].real() + a2 * d2v2[i].real();
  }
  fft.to_spectral(d1v1);
  fft.to_spectral(d1v2);
  std::vector<Mode> modes;
  for (std::int64_t a = -out_cut; a <= out_cut; ++a)
    for (std::int64_t b = -out_cut; b <= out_cut; ++b) {
      if (a == 0 && b == 0) continue;
      const LatticePoint j{a, b};
      const auto at = d1v1.index(j);
      modes.push_back({j, {d1v1[at], d1v2[at]}});
    }
  return symmetrize(FourierField::from_modes(u.M(), std::move(modes)));
}

}  // namespace detail

// (u . grad) v, truncated to |j|_inf <= M (or <= 2M/3 with dealiasing).
inline FourierField convection(const FourierField& u, const FourierField& v, ProductOptions opts = {}) {
  if (u.M() != v.M()) throw SizeMismatch("convection: truncation radii differ");
  const int M = u.M();
  const std::int64_t cut = opts.dealias ? detail::dealias_cut(M) : M;
  if (u.empty() || v.empty()) return FourierField(M);
  if (opts.direct) {
    auto acc = detail::direct_convection(u, v, cut, cut);
    std::vector<Mode> modes;
    modes.reserve(acc.size());
    for (auto& [j, c] : acc) modes.push_back({j, c});
    return detail::symmetrize(FourierField::from_modes(M, std::move(modes)));
  }
  return detail::spectral_convection(u, v, cut, cut);
}

inline FourierField bilinear_B(const FourierField& u, const FourierField& v, ProductOptions opts = {}) {
  return leray_project(convection(u, v, opts));
}

// b(u, v, w) = sum_{m,n} (u_m d_m v_n, w_n), summed mode pair by mode pair
// with no truncation of the product.
inline double trilinear_b(const FourierField& u, const FourierField& v, const FourierField& w) {
  if (u.M() != v.M() || v.M() != w.M()) throw SizeMismatch("trilinear_b: truncation radii differ");
  Complex acc{};
  for (const auto& p : u)
    for (const auto& q : v) {
      const LatticePoint n = p.j + q.j;
      if (n.is_zero() || sup_norm(n) > w.M()) continue;
      const Vec2c wn = w.at(n);
      if (wn.norm2() == 0.0) continue;
      const Complex s = Complex(0.0, 1.0) * (p.c.x * static_cast<double>(q.j.j1) + p.c.y * static_cast<double>(q.j.j2));
      acc += s * cdot(q.c, wn);
    }
  return acc.real();
}

// Same form by trapezoidal quadrature in physical space, exact for the
// degree-3M trigonometric integrand on an n >= 3M + 1 grid.
inline double trilinear_b_quadrature(const FourierField& u, const FourierField& v, const FourierField& w) {
  if (u.M() != v.M() || v.M() != w.M()) throw SizeMismatch("trilinear_b_quadrature: truncation radii differ");
  const int n = fft_friendly_size(3 * u.M() + 1);
  const Fft2d& fft = fft_plan(n);
  const Complex I(0.0, 1.0);
  GridBuffer u1(n), u2(n), d1v1(n), d2v1(n), d1v2(n), d2v2(n), w1(n), w2(n);
  for (const auto& m : u) {
    u1[u1.index(m.j)] = m.c.x;
    u2[u1.index(m.j)] = m.c.y;
  }
  for (const auto& m : v) {
    const auto at = d1v1.index(m.j);
    d1v1[at] = I * static_cast<double>(m.j.j1) * m.c.x;
    d2v1[at] = I * static_cast<double>(m.j.j2) * m.c.x;
    d1v2[at] = I * static_cast<double>(m.j.j1) * m.c.y;
    d2v2[at] = I * static_cast<double>(m.j.j2) * m.c.y;
  }
  for (const auto& m : w) {
    w1[w1.index(m.j)] = m.c.x;
    w2[w1.index(m.j)] = m.c.y;
  }
  for (GridBuffer* g : {&u1, &u2, &d1v1, &d2v1, &d1v2, &d2v2, &w1, &w2}) fft.to_physical(*g);
  double acc = 0.0;
  for (std::size_t i = 0; i < u1.size(); ++i) {
    const double a1 = u1[i].real(), a2 = u2[i].real();
    acc += (a1 * d1v1[i].real() + a2 * d2v1[i].real()) * w1[i].real() +
           (a1 * d1v2[i].real() + a2 * d2v2[i].real()) * w2[i].real();
  }
  return acc / (static_cast<double>(n) * n);
}

// ---------------------------------------------------------------------------

struct PowerGap {
  double lhs = 0.0;  // a^beta - b^beta
  double rhs = 0.0;  // (a - b)(a^{beta-1} + b^{beta-1}) / 2
};

inline PowerGap power_gap_lower_bound(double a, double b, double beta) {
  if (!(b >= 0.0) || !(a >= b) || !(beta >= 1.0))
    throw DomainError("power_gap_lower_bound: requires a >= b >= 0 and beta >= 1");
  return {std::pow(a, beta) - std::pow(b, beta), 0.5 * (a - b) * (std::pow(a, beta - 1.0) + std::pow(b, beta - 1.0))};
}

// ---------------------------------------------------------------------------
// Cutoff selection from a certified annulus.

struct CutoffChoice {
  bool accepted = false;
  double lambda_N = 0.0;
  double lambda_N1 = 0.0;
  double k = 0.0;
  double s = 0.0;
  double required_ratio = 1.0;  // c in k >= c lambda_N^s
  double achieved_ratio = 0.0;  // k / lambda_N^s
  std::vector<std::string> failures;

  ModeProjector P_N() const { return ModeProjector::low(lambda_N); }
  ModeProjector Q_N() const { return ModeProjector::high(lambda_N); }
  ModeProjector P_low() const { return ModeProjector::below(lambda_N, k); }
  ModeProjector Q_high() const { return ModeProjector::above(lambda_N, k); }
  ModeProjector I_mid() const { return ModeProjector::mid(lambda_N, k); }
};

// lambda_N = largest eigenvalue <= annulus.lambda, lambda_{N+1} the next one,
// k = annulus half-width. Accepted iff 1 <= lambda_{N+1} - lambda_N <= k/2 and
// k >= c lambda_N^s. Rejection is returned as a value with reasons.
inline CutoffChoice choose_cutoff(const std::vector<EigenvalueCount>& eigs, const SparseAnnulus& annulus,
                                  double c = 1.0) {
  CutoffChoice out;
  out.k = annulus.half_width;
  out.s = annulus.s;
  out.required_ratio = c;
  std::optional<std::int64_t> below, above;
  for (const auto& e : eigs) {
    if (static_cast<double>(e.eigenvalue) <= annulus.lambda)
      below = e.eigenvalue;
    else {
      above = e.eigenvalue;
      break;
    }
  }
  if (!below || !above) throw InvalidRange("choose_cutoff: eigenvalue list does not bracket the annulus center");
  out.lambda_N = static_cast<double>(*below);
  out.lambda_N1 = static_cast<double>(*above);
  out.achieved_ratio = out.k / std::pow(out.lambda_N, out.s);

  const double gap = out.lambda_N1 - out.lambda_N;
  if (!(gap >= 1.0)) out.failures.push_back("lambda_{N+1} - lambda_N >= 1 fails");
  if (!(gap <= out.k / 2.0))
    out.failures.push_back("lambda_{N+1} - lambda_N <= k/2 fails (gap " + std::to_string(gap) + ", k/2 " +
                           std::to_string(out.k / 2.0) + ")");
  if (!(out.achieved_ratio >= c))
    out.failures.push_back("k >= c lambda_N^s fails (k/lambda_N^s = " + std::to_string(out.achieved_ratio) +
                           ", c = " + std::to_string(c) + ")");
  out.accepted = out.failures.empty();
  return out;
}

}  // namespace hyperim

#pragma once

// Smooth cut-off theta, the modewise truncation operator
//
//   W(u) = sum_j (rho / |j|^{3+eps}) P_j theta_vec(|j|^{3+eps} u_j / rho) e^{i j.x},
//
// its Gateaux derivative, and the prepared nonlinearity F(u) = A^{-1/2} B(W(u), W(u)).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "hyperim/error.hpp"
#include "hyperim/field.hpp"
#include "hyperim/spectral.hpp"

namespace hyperim {

// 2x2 real matrix acting on (Re h, Im h).
struct RealLinearMap {
  double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;

  Complex operator()(Complex h) const {
    return {a11 * h.real() + a12 * h.imag(), a21 * h.real() + a22 * h.imag()};
  }
  // spectral norm of a symmetric 2x2 matrix
  double norm() const {
    const double tr = 0.5 * (a11 + a22);
    const double det = a11 * a22 - a12 * a21;
    const double disc = std::sqrt(std::max(0.0, tr * tr - det));
    return std::max(std::abs(tr + disc), std::abs(tr - disc));
  }
};

namespace detail {
inline double smooth_exp(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double smooth_exp_deriv(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }
}  // namespace detail

// theta(xi) = xi psi(|xi|), psi = 1 on [0, 1], 0 on [R, inf), exp(-1/t)
// smooth step in between.
class CutoffProfile {
 public:
  explicit CutoffProfile(double outer_radius) : outer_(outer_radius) {
    if (!(outer_radius > 1.0)) throw DomainError("CutoffProfile: outer radius must exceed 1");
  }

  // Largest outer radius with sup_r r psi(r) <= 2, found once by bisection.
  static double default_outer_radius() {
    static const double R = [] {
      double lo = 1.5, hi = 16.0;
      for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (CutoffProfile(mid).sup_theta() <= 2.0 ? lo : hi) = mid;
      }
      return lo;
    }();
    return R;
  }
  static const CutoffProfile& standard() {
    static const CutoffProfile p(default_outer_radius());
    return p;
  }

  double outer_radius() const { return outer_; }

  double psi(double r) const {
    if (r <= 1.0) return 1.0;
    if (r >= outer_) return 0.0;
    const double t = (r - 1.0) / (outer_ - 1.0);
    const double a = detail::smooth_exp(1.0 - t);
    const double b = detail::smooth_exp(t);
    return a / (a + b);
  }

  double dpsi(double r) const {
    if (r <= 1.0 || r >= outer_) return 0.0;
    const double t = (r - 1.0) / (outer_ - 1.0);
    const double a = detail::smooth_exp(1.0 - t), da = -detail::smooth_exp_deriv(1.0 - t);
    const double b = detail::smooth_exp(t), db = detail::smooth_exp_deriv(t);
    const double den = a + b;
    return (da * den - a * (da + db)) / (den * den) / (outer_ - 1.0);
  }

  Complex theta(Complex xi) const { return xi * psi(std::abs(xi)); }

  // Real Jacobian psi I + psi'(r) x x^T / r with x = (Re xi, Im xi).
  RealLinearMap jacobian(Complex xi) const {
    const double r = std::abs(xi);
    const double p = psi(r);
    if (r <= 1.0 || r >= outer_) return {p, 0.0, 0.0, p};
    const double g = dpsi(r) / r;
    const double x = xi.real(), y = xi.imag();
    return {p + g * x * x, g * x * y, g * x * y, p + g * y * y};
  }

  // sup_r r psi(r), sampled then refined by golden section.
  double sup_theta() const { return sup_of([this](double r) { return r * psi(r); }); }

  // sup of the Jacobian norm, max(|psi|, |psi + r psi'|).
  double jacobian_bound() const {
    return sup_of([this](double r) { return std::max(std::abs(psi(r)), std::abs(psi(r) + r * dpsi(r))); });
  }

 private:
  template <class Fn>
  double sup_of(Fn&& f) const {
    constexpr int samples = 4000;
    double best = f(1.0);
    double arg = 1.0;
    for (int i = 0; i <= samples; ++i) {
      const double r = 1.0 + (outer_ - 1.0) * i / samples;
      const double v = f(r);
      if (v > best) {
        best = v;
        arg = r;
      }
    }
    const double h = (outer_ - 1.0) / samples;
    double lo = std::max(1.0, arg - h), hi = std::min(outer_, arg + h);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
      const double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
      (f(c) > f(d) ? hi : lo) = (f(c) > f(d) ? d : c);
    }
    return std::max(best, f(0.5 * (lo + hi)));
  }

  double outer_;
};

// ---------------------------------------------------------------------------

namespace detail {
inline double ball_weight(LatticePoint j, const SpectralParams& params) {
  return std::pow(static_cast<double>(j.norm2()), 0.5 * params.ball_index());
}
}  // namespace detail

inline FourierField apply_W(const FourierField& u, const SpectralParams& params,
                            const CutoffProfile& theta = CutoffProfile::standard()) {
  const double rho = params.rho;
  return u.map([&](LatticePoint j, const Vec2c& c) {
    const double a = detail::ball_weight(j, params);
    const Vec2c t{theta.theta(a * c.x / rho), theta.theta(a * c.y / rho)};
    return (rho / a) * leray_matrix_apply(j, t);
  });
}

// W'(u) v = sum_j P_j [theta'(xi_j1) v_j1, theta'(xi_j2) v_j2], xi_j = |j|^{3+eps} u_j / rho.
inline FourierField apply_W_prime(const FourierField& u, const FourierField& v, const SpectralParams& params,
                                  const CutoffProfile& theta = CutoffProfile::standard()) {
  if (u.M() != v.M()) throw SizeMismatch("apply_W_prime: truncation radii differ");
  const double rho = params.rho;
  return v.map([&](LatticePoint j, const Vec2c& h) {
    const double a = detail::ball_weight(j, params);
    const Vec2c c = u.at(j);
    const Vec2c t{theta.jacobian(a * c.x / rho)(h.x), theta.jacobian(a * c.y / rho)(h.y)};
    return leray_matrix_apply(j, t);
  });
}

inline FourierField nonlinearity_F(const FourierField& u, const SpectralParams& params, ProductOptions opts = {},
                                   const CutoffProfile& theta = CutoffProfile::standard()) {
  const FourierField w = apply_W(u, params, theta);
  return apply_A_power(bilinear_B(w, w, opts), -0.5);
}

// F'(u) v = A^{-1/2} [B(W'(u) v, W(u)) + B(W(u), W'(u) v)]
inline FourierField nonlinearity_F_prime(const FourierField& u, const FourierField& v, const SpectralParams& params,
                                         ProductOptions opts = {},
                                         const CutoffProfile& theta = CutoffProfile::standard()) {
  const FourierField w = apply_W(u, params, theta);
  const FourierField dw = apply_W_prime(u, v, params, theta);
  return apply_A_power(bilinear_B(dw, w, opts) + bilinear_B(w, dw, opts), -0.5);
}

// (F'(u) v, w) = -b(W(u), A^{-1/2} w, W'(u) v) - b(W'(u) v, A^{-1/2} w, W(u))
inline double nonlinearity_F_prime_weak(const FourierField& u, const FourierField& v, const FourierField& w,
                                        const SpectralParams& params,
                                        const CutoffProfile& theta = CutoffProfile::standard()) {
  const FourierField wu = apply_W(u, params, theta);
  const FourierField dw = apply_W_prime(u, v, params, theta);
  const FourierField aw = apply_A_power(w, -0.5);
  return -trilinear_b(wu, aw, dw) - trilinear_b(dw, aw, wu);
}

// ---------------------------------------------------------------------------
// Tail-sum constants for the truncated mode set. With |theta| <= T the
// coefficients obey |W(u)_j| <= a_j = sqrt(2) T rho |j|^{-3-eps}.

namespace detail {
inline std::vector<LatticePoint> square_modes(std::int64_t cut) {
  std::vector<LatticePoint> out;
  for (std::int64_t a = -cut; a <= cut; ++a)
    for (std::int64_t b = -cut; b <= cut; ++b)
      if (a != 0 || b != 0) out.push_back({a, b});
  return out;
}
inline double w_coefficient_bound(LatticePoint j, const SpectralParams& params, const CutoffProfile& theta) {
  return std::sqrt(2.0) * theta.sup_theta() * params.rho / ball_weight(j, params);
}
}  // namespace detail

// sup_u ||W(u)||_{H^2} <= sqrt(sum_j |j|^4 a_j^2)
inline double w_h2_bound(const SpectralParams& params, int M, const CutoffProfile& theta = CutoffProfile::standard()) {
  const double T2 = 2.0 * theta.sup_theta() * theta.sup_theta();
  double acc = 0.0;
  for (const auto& j : detail::square_modes(M)) {
    const double n2 = static_cast<double>(j.norm2());
    acc += T2 * params.rho * params.rho * std::pow(n2, 2.0 - params.ball_index());
  }
  return std::sqrt(acc);
}

// sup_u ||F(u)||_{H^2} = sup ||B(W, W)||_{H^1} <= sqrt(sum_n |n|^2 c_n^2),
// c_n = sum_{p+q=n} a_p |q| a_q over the modes entering the product.
inline double f_h2_bound(const SpectralParams& params, int M, ProductOptions opts = {},
                         const CutoffProfile& theta = CutoffProfile::standard()) {
  const std::int64_t cut = opts.dealias ? detail::dealias_cut(M) : M;
  const auto modes = detail::square_modes(cut);
  std::vector<double> a(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i) a[i] = detail::w_coefficient_bound(modes[i], params, theta);
  const std::int64_t span = 2 * cut + 1;
  std::vector<double> c(static_cast<std::size_t>((2 * span) * (2 * span)), 0.0);
  const auto slot = [&](LatticePoint n) {
    return static_cast<std::size_t>((n.j1 + 2 * cut) * (2 * span) + (n.j2 + 2 * cut));
  };
  for (std::size_t p = 0; p < modes.size(); ++p)
    for (std::size_t q = 0; q < modes.size(); ++q) {
      const LatticePoint n = modes[p] + modes[q];
      if (n.is_zero() || sup_norm(n) > cut) continue;
      c[slot(n)] += a[p] * norm(modes[q]) * a[q];
    }
  double acc = 0.0;
  for (const auto& n : detail::square_modes(cut)) acc += static_cast<double>(n.norm2()) * c[slot(n)] * c[slot(n)];
  return std::sqrt(acc);
}

// ||W'(u)|| <= sup of the theta Jacobian norm (P_j has norm 1).
inline double w_prime_bound(const CutoffProfile& theta = CutoffProfile::standard()) { return theta.jacobian_bound(); }

}  // namespace hyperim

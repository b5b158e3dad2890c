#pragma once

// The mid-band block I F'(u) I on an annulus of lattice modes: basis,
// dense assembly, operator norm, and the low/high frequency mechanism checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hyperim/error.hpp"
#include "hyperim/field.hpp"
#include "hyperim/lattice.hpp"
#include "hyperim/spectral.hpp"
#include "hyperim/truncation.hpp"

namespace hyperim {

// One lattice point of the window with its divergence-free unit direction.
// j and -j share the direction of their positive-half representative, so the
// reality condition reads z_{-j} = conj(z_j) in these coordinates.
struct AnnulusMode {
  LatticePoint j;
  double dx = 0.0, dy = 0.0;
  std::size_t partner = 0;  // index of -j
};

struct AnnulusBasis {
  NormWindow window;
  int M = 0;
  std::vector<AnnulusMode> modes;            // lexicographic in j
  std::vector<std::size_t> positive;         // indices of positive-half modes, lexicographic

  std::size_t size() const { return modes.size(); }
  bool empty() const { return modes.empty(); }
  // single-mode field with coefficient z on mode i
  FourierField mode_field(std::size_t i, Complex z = 1.0) const {
    FourierField u(M);
    const auto& m = modes[i];
    u.set(m.j, {z * m.dx, z * m.dy});
    return u;
  }
  // Real orthonormal coordinates: for each positive-half j, cos then sin,
  // (e_j + e_{-j}) / sqrt(2) and i (e_j - e_{-j}) / sqrt(2).
  std::size_t real_dim() const { return 2 * positive.size(); }
  FourierField real_field(std::size_t c) const {
    const auto& m = modes[positive[c / 2]];
    const Complex z = (c % 2 == 0 ? Complex(1.0) : Complex(0.0, 1.0)) / std::sqrt(2.0);
    FourierField u(M);
    u.set_real_pair(m.j, {z * m.dx, z * m.dy});
    return u;
  }
  FourierField from_real(const Eigen::VectorXd& x) const {
    FourierField u(M);
    for (std::size_t c = 0; c < real_dim(); ++c) u = axpy(u, x(static_cast<Eigen::Index>(c)), real_field(c));
    return u;
  }
  Eigen::VectorXd to_real(const FourierField& u) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(real_dim()));
    for (std::size_t c = 0; c < real_dim(); ++c) x(static_cast<Eigen::Index>(c)) = inner(u, real_field(c)).real();
    return x;
  }
};

inline AnnulusBasis annulus_basis(NormWindow window, int M) {
  AnnulusBasis b;
  b.window = window;
  b.M = M;
  if (window.empty()) return b;
  if (static_cast<double>(M) * M < static_cast<double>(window.hi))
    throw InvalidRange("annulus_basis: window exceeds the truncation radius");
  for (const auto& j : shell_points(window)) {
    const LatticePoint r = is_positive_half(j) ? j : -j;
    const double nj = norm(j);
    b.modes.push_back({j, -static_cast<double>(r.j2) / nj, static_cast<double>(r.j1) / nj, 0});
  }
  for (std::size_t i = 0; i < b.modes.size(); ++i) {
    const auto it = std::lower_bound(b.modes.begin(), b.modes.end(), -b.modes[i].j,
                                     [](const AnnulusMode& m, LatticePoint x) { return m.j < x; });
    b.modes[i].partner = static_cast<std::size_t>(it - b.modes.begin());
    if (is_positive_half(b.modes[i].j)) b.positive.push_back(i);
  }
  return b;
}

// Window lambda - k <= |j|^2 <= lambda + k.
inline AnnulusBasis annulus_basis(double lambda, double k, int M) {
  if (!(k >= 0.0)) throw InvalidRange("annulus_basis: k must be nonnegative");
  return annulus_basis(NormWindow::closed(lambda - k, lambda + k), M);
}

// ---------------------------------------------------------------------------
// Assembly. Column c holds the real coordinates of I F'(u) phi_c, with the
// product evaluated exactly (no truncation) on the window modes only.

namespace detail {
// ((a . grad) b)_n for target n, a given by few modes
inline Vec2c convection_at_small_left(const FourierField& a, const FourierField& b, LatticePoint n) {
  Vec2c out{};
  for (const auto& p : a) {
    const LatticePoint q = n - p.j;
    if (q.is_zero()) continue;
    const Vec2c bq = b.at(q);
    const Complex s = Complex(0.0, 1.0) * (p.c.x * static_cast<double>(q.j1) + p.c.y * static_cast<double>(q.j2));
    out += s * bq;
  }
  return out;
}
// ((a . grad) b)_n for target n, b given by few modes
inline Vec2c convection_at_small_right(const FourierField& a, const FourierField& b, LatticePoint n) {
  Vec2c out{};
  for (const auto& q : b) {
    const LatticePoint p = n - q.j;
    if (p.is_zero()) continue;
    const Vec2c ap = a.at(p);
    const Complex s = Complex(0.0, 1.0) * (ap.x * static_cast<double>(q.j.j1) + ap.y * static_cast<double>(q.j.j2));
    out += s * q.c;
  }
  return out;
}
}  // namespace detail

struct RestrictedOperator {
  Eigen::MatrixXd matrix;  // real coordinates of AnnulusBasis
};

inline RestrictedOperator assemble_restricted_operator(const FourierField& u, const AnnulusBasis& basis,
                                                       const SpectralParams& params) {
  if (basis.empty()) throw InvalidRange("assemble_restricted_operator: empty basis");
  if (u.M() != basis.M) throw SizeMismatch("assemble_restricted_operator: truncation radii differ");
  const auto n = static_cast<Eigen::Index>(basis.real_dim());
  RestrictedOperator out{Eigen::MatrixXd::Zero(n, n)};
  const FourierField w = apply_W(u, params);
  for (Eigen::Index c = 0; c < n; ++c) {
    const FourierField g = apply_W_prime(u, basis.real_field(static_cast<std::size_t>(c)), params);
    for (std::size_t r = 0; r < basis.positive.size(); ++r) {
      const auto& m = basis.modes[basis.positive[r]];
      Vec2c b = detail::convection_at_small_left(g, w, m.j);
      b += detail::convection_at_small_right(w, g, m.j);
      const Complex fj = cdot(leray_matrix_apply(m.j, b), Vec2c{m.dx, m.dy}) / norm(m.j);
      // (F, phi_cos) = sqrt(2) Re F_j.d, (F, phi_sin) = sqrt(2) Im F_j.d
      out.matrix(static_cast<Eigen::Index>(2 * r), c) = std::sqrt(2.0) * fj.real();
      out.matrix(static_cast<Eigen::Index>(2 * r + 1), c) = std::sqrt(2.0) * fj.imag();
    }
  }
  return out;
}

// The same operator in the single-mode coordinates z_j = (v, e_j):
// Z = T X T^H with T the unitary change from real coordinates.
inline Eigen::MatrixXcd mode_representation(const RestrictedOperator& op, const AnnulusBasis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  if (op.matrix.rows() != n) throw SizeMismatch("mode_representation: basis and matrix differ");
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(n, n);
  const double h = 1.0 / std::sqrt(2.0);
  for (std::size_t r = 0; r < basis.positive.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(basis.positive[r]);
    const auto ip = static_cast<Eigen::Index>(basis.modes[basis.positive[r]].partner);
    const auto c = static_cast<Eigen::Index>(2 * r);
    T(i, c) = h;
    T(ip, c) = h;
    T(i, c + 1) = Complex(0.0, h);
    T(ip, c + 1) = Complex(0.0, -h);
  }
  return T * op.matrix.cast<Complex>() * T.adjoint();
}

// ---------------------------------------------------------------------------
// Largest singular value by power iteration on G = A^H A. Annulus pairing makes
// the top singular values cluster (relative gaps ~1e-7), so the iteration is
// run on G^(2^m), formed by repeated normalized squaring, before polishing on G.

template <class Derived>
double restricted_norm(const Eigen::MatrixBase<Derived>& a, double tol = 1e-8, int max_iter = 10000) {
  using Mat = typename Derived::PlainObject;
  using Vec = Eigen::Matrix<typename Mat::Scalar, Eigen::Dynamic, 1>;
  if (!a.allFinite()) throw DomainError("restricted_norm: non-finite entries");
  if (a.size() == 0 || a.norm() == 0.0) return 0.0;
  const Mat g = a.adjoint() * a;
  Mat h = g / g.norm();
  for (int k = 0; k < 64; ++k) {
    Mat next = h * h;
    next /= next.norm();
    const double change = (next - h).norm();
    h = std::move(next);
    if (change <= 1e-14) break;
  }
  Vec x(g.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = 1.0 + static_cast<double>(i + 1) / static_cast<double>(x.size() + 1);
  x = h * x;
  if (x.norm() == 0.0) x = h.col(0);  // start vector orthogonal to the top eigenspace
  x.normalize();
  for (int it = 0; it < max_iter; ++it) {
    const Vec y = g * x;
    const double rayleigh = std::real(x.dot(y));
    if ((y - rayleigh * x).norm() <= tol * std::abs(rayleigh)) return std::sqrt(std::max(rayleigh, 0.0));
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    x = y / ny;
  }
  throw ConvergenceError("restricted_norm: power iteration did not converge");
}

// ---------------------------------------------------------------------------
// Mechanism diagnostics.

// Largest |I (phi_a psi_b)_n| over component pairs a, b and window modes n,
// with the product evaluated by exact convolution.
inline double cancellation_residual(const FourierField& phi, const FourierField& psi, NormWindow window) {
  std::map<LatticePoint, std::array<Complex, 4>> acc;
  for (const auto& q : psi) {
    if (!window.contains(q.j.norm2())) continue;
    for (const auto& p : phi) {
      const LatticePoint n = p.j + q.j;
      if (!window.contains(n.norm2())) continue;
      auto& a = acc[n];
      a[0] += p.c.x * q.c.x;
      a[1] += p.c.x * q.c.y;
      a[2] += p.c.y * q.c.x;
      a[3] += p.c.y * q.c.y;
    }
  }
  double out = 0.0;
  for (const auto& [n, a] : acc)
    for (const auto& z : a) out = std::max(out, std::abs(z));
  return out;
}

struct MechanismBounds {
  double tail = 0.0;       // |phi_{>r}|
  double tail_bound = 0.0; // r^{-2} |phi|_{H^2}
  double product_factor = 0.0;  // r^{-1} |phi|_{H^2}, the product-projection estimate without its constant
};

inline MechanismBounds mechanism_bounds(const FourierField& phi, double r) {
  if (!(r > 0.0)) throw DomainError("mechanism_bounds: r must be positive");
  MechanismBounds m;
  double t2 = 0.0;
  for (const auto& x : phi)
    if (static_cast<double>(x.j.norm2()) > r * r) t2 += x.c.norm2();
  m.tail = std::sqrt(t2);
  const double h2 = sobolev_norm(phi, 2.0);
  m.tail_bound = h2 / (r * r);
  m.product_factor = h2 / r;
  return m;
}

// ---------------------------------------------------------------------------
// Samples and the averaging report.

// Truncation radius large enough for every difference of window modes.
inline int averaging_truncation(NormWindow window) {
  return static_cast<int>(std::ceil(2.0 * std::sqrt(static_cast<double>(window.hi)))) + 1;
}

// Positive-half support: low disk |j| <= r, all differences of window modes, the window itself.
inline std::vector<LatticePoint> averaging_support(NormWindow window, double r) {
  std::set<LatticePoint> out;
  const auto add = [&](LatticePoint j) {
    if (!j.is_zero()) out.insert(is_positive_half(j) ? j : -j);
  };
  const auto R = static_cast<std::int64_t>(std::floor(r));
  for (std::int64_t a = -R; a <= R; ++a)
    for (std::int64_t b = -R; b <= R; ++b)
      if (static_cast<double>(a * a + b * b) <= r * r) add({a, b});
  const auto pts = shell_points(window);
  for (const auto& n : pts) {
    add(n);
    for (const auto& l : pts) add(n - l);
  }
  return {out.begin(), out.end()};
}

struct AveragingSample {
  std::size_t id = 0;
  std::string regime;  // "inside" or "outside" the absorbing ball
  double u_norm = 0.0;  // |u|_{H^{3+eps}}
  double norm = 0.0;
  bool pass = false;
  MechanismBounds mechanism;
};

// Half uniform in the ball |u|_{H^{3+eps}} <= rho, half at 10..1000 rho.
inline std::vector<FourierField> averaging_samples(NormWindow window, double r, const SpectralParams& params,
                                                   int count, std::uint64_t seed) {
  const int M = averaging_truncation(window);
  const auto support = averaging_support(window, r);
  Rng rng(seed);
  std::uniform_real_distribution<double> frac(0.0, 1.0), decade(1.0, 3.0);
  std::vector<FourierField> out;
  for (int i = 0; i < count; ++i) {
    const FourierField u = random_field_on(M, support, params.ball_index() + 1.0, rng);
    const double scale = i < count / 2 ? (1.0 - frac(rng)) : std::pow(10.0, decade(rng));
    out.push_back((scale * params.rho / sobolev_norm(u, params.ball_index())) * u);
  }
  return out;
}

struct AveragingReport {
  double lambda_N = 0.0;
  double k = 0.0;
  double beta = 0.0;
  double s = 0.0;
  double r = 0.0;
  double bound = 0.0;
  std::int64_t window_lo = 0, window_hi = 0;
  std::size_t lattice_modes = 0;
  std::size_t matrix_dim = 0;  // 2 * lattice_modes - lattice_modes (one divergence-free direction each)
  std::vector<AveragingSample> samples;
  double max_norm = 0.0;
  double mechanism_tail = 0.0;
  bool all_pass = false;
  double achieved_ratio = 0.0;  // k / lambda_N^s
};

// lambda_N from the cutoff choice; the block acts on the certified window of the annulus.
inline AveragingReport check_averaging(const std::vector<FourierField>& u_samples, const SparseAnnulus& annulus,
                                       double lambda_N, const SpectralParams& params) {
  AveragingReport rep;
  rep.lambda_N = lambda_N;
  rep.k = annulus.half_width;
  rep.beta = params.beta;
  rep.s = annulus.s;
  rep.r = std::pow(lambda_N, annulus.s / 2.0);
  rep.bound = std::pow(lambda_N, -(3.0 - 2.0 * params.beta) / 2.0) / 16.0;
  rep.achieved_ratio = rep.k / std::pow(lambda_N, annulus.s);
  const NormWindow win = annulus.window();
  rep.window_lo = win.lo;
  rep.window_hi = win.hi;
  if (u_samples.empty()) return rep;
  const AnnulusBasis basis = annulus_basis(win, u_samples.front().M());
  rep.lattice_modes = basis.size();
  rep.matrix_dim = basis.real_dim();
  rep.all_pass = true;
  for (std::size_t i = 0; i < u_samples.size(); ++i) {
    AveragingSample smp;
    smp.id = i;
    smp.u_norm = sobolev_norm(u_samples[i], params.ball_index());
    smp.regime = smp.u_norm <= params.rho ? "inside" : "outside";
    smp.norm = basis.empty() ? 0.0 : restricted_norm(assemble_restricted_operator(u_samples[i], basis, params).matrix);
    smp.pass = smp.norm <= rep.bound;
    smp.mechanism = mechanism_bounds(apply_W(u_samples[i], params), rep.r);
    rep.max_norm = std::max(rep.max_norm, smp.norm);
    rep.mechanism_tail = std::max(rep.mechanism_tail, smp.mechanism.tail);
    rep.all_pass = rep.all_pass && smp.pass;
    rep.samples.push_back(smp);
  }
  return rep;
}

}  // namespace hyperim

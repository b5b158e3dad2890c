#pragma once

// Thin RAII layer over FFTW for square periodic grids.
//
// Plans use FFTW_ESTIMATE so the algorithm choice, and therefore every
// rounding, is identical from run to run.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>

#include "hyperim/error.hpp"
#include "hyperim/field.hpp"

namespace hyperim {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// n x n complex buffer, row index = first wavenumber component.
class GridBuffer {
 public:
  explicit GridBuffer(int n)
      : n_(n), data_(reinterpret_cast<Complex*>(fftw_alloc_complex(static_cast<std::size_t>(n) * n))) {
    if (!data_) throw Error("GridBuffer: allocation failed");
    zero();
  }
  int n() const { return n_; }
  std::size_t size() const { return static_cast<std::size_t>(n_) * n_; }
  Complex* data() { return data_.get(); }
  const Complex* data() const { return data_.get(); }
  Complex& operator[](std::size_t i) { return data_.get()[i]; }
  const Complex& operator[](std::size_t i) const { return data_.get()[i]; }
  void zero() {
    for (std::size_t i = 0; i < size(); ++i) data_.get()[i] = Complex{};
  }
  // storage index of wavenumber j (periodic wrap)
  std::size_t index(LatticePoint j) const {
    const auto w = [this](std::int64_t a) { return static_cast<std::size_t>(((a % n_) + n_) % n_); };
    return w(j.j1) * static_cast<std::size_t>(n_) + w(j.j2);
  }

 private:
  int n_;
  std::unique_ptr<Complex, FftwFree> data_;
};

class Fft2d {
 public:
  explicit Fft2d(int n) : n_(n) {
    GridBuffer scratch(n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fwd_ = fftw_plan_dft_2d(n, n, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(n, n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw Error("Fft2d: plan creation failed");
  }
  ~Fft2d() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  int n() const { return n_; }

  // u(x) = sum_j u_j e^{i j.x} at x = 2pi (a, b) / n
  void to_physical(GridBuffer& g) const {
    check(g);
    auto* p = reinterpret_cast<fftw_complex*>(g.data());
    fftw_execute_dft(bwd_, p, p);
  }
  // u_j = n^{-2} sum_x u(x) e^{-i j.x}
  void to_spectral(GridBuffer& g) const {
    check(g);
    auto* p = reinterpret_cast<fftw_complex*>(g.data());
    fftw_execute_dft(fwd_, p, p);
    const double scale = 1.0 / (static_cast<double>(n_) * n_);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale;
  }

 private:
  void check(const GridBuffer& g) const {
    if (g.n() != n_) throw SizeMismatch("Fft2d: grid size differs from plan");
  }
  int n_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

// Plans are shared per grid size; FFTW's planner is not thread safe.
inline const Fft2d& fft_plan(int n) {
  static std::mutex mtx;
  static std::map<int, std::unique_ptr<Fft2d>> cache;
  std::lock_guard lock(mtx);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Fft2d>(n);
  return *slot;
}

// Smallest 2^a 3^b 5^c that is >= n.
inline int fft_friendly_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace hyperim

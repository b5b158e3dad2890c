#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hyperim/error.hpp"

namespace hyperim {

// Ordinary least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("ls_slope: need >= 2 paired samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("ls_slope: degenerate abscissae");
  return sxy / sxx;
}

// Slope of log(y) against log(x); every value must be positive.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("loglog_slope: size mismatch");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_slope: nonpositive sample");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return ls_slope(lx, ly);
}

}  // namespace hyperim

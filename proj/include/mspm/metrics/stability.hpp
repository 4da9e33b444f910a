#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mspm/core/error.hpp"

namespace mspm::metrics {

/// Daily rate of return series exp(R_t) - 1.
inline std::vector<double> daily_rates(std::span<const double> r) {
  std::vector<double> d;
  d.reserve(r.size());
  for (double x : r) d.push_back(std::exp(x) - 1.0);
  return d;
}

/// Trailing means SMA_i for i = n..k (length k - n + 1).
inline std::vector<double> sma(std::span<const double> x, std::size_t n) {
  if (n == 0 || x.size() < n) throw DataError("sma: series shorter than the window");
  std::vector<double> out;
  out.reserve(x.size() - n + 1);
  for (std::size_t i = n; i <= x.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i - n; j < i; ++j) s += x[j];
    out.push_back(s / static_cast<double>(n));
  }
  return out;
}

/// Population standard deviation of each trailing window around its SMA.
inline std::vector<double> rstd_drr(std::span<const double> drr, std::size_t n = 5) {
  const auto means = sma(drr, n);
  std::vector<double> out(means.size());
  for (std::size_t k = 0; k < means.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = k; j < k + n; ++j) s += (drr[j] - means[k]) * (drr[j] - means[k]);
    out[k] = std::sqrt(s / static_cast<double>(n));
  }
  return out;
}

}  // namespace mspm::metrics

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/sam/accounting.hpp"

namespace mspm::metrics {

/// mean exp(R_t); the literal daily-rate average.
inline double raw_drr(std::span<const double> r) {
  if (r.empty()) throw DataError("drr: empty return series");
  double s = 0.0;
  for (double x : r) s += std::exp(x);
  return s / static_cast<double>(r.size());
}

/// (mean exp(R_t) - 1) * 100
inline double drr_pct(std::span<const double> r) { return (raw_drr(r) - 1.0) * 100.0; }

struct ArrResult {
  /// p_T / p_0
  double raw = 1.0;
  double pct = 0.0;
  double final_value = 0.0;
};

inline ArrResult arr(std::span<const double> r, double p0) {
  if (r.empty()) throw DataError("arr: empty return series");
  double sum = 0.0;
  for (double x : r) sum += x;
  ArrResult a;
  a.raw = std::exp(sum);
  a.final_value = p0 * a.raw;
  a.pct = (a.raw - 1.0) * 100.0;
  return a;
}

/// (mean exp(R) - 1 - R_f) / sqrt(population variance of the negative R_t - R_f).
inline double sortino(std::span<const double> r, double risk_free = 0.0) {
  if (r.empty()) throw DataError("sortino: empty return series");
  std::vector<double> down;
  for (double x : r)
    if (x < 0.0) down.push_back(x - risk_free);
  if (down.empty()) throw NumericalError("sortino: no negative returns, downside deviation is zero");
  double mean = 0.0;
  for (double x : down) mean += x;
  mean /= static_cast<double>(down.size());
  double var = 0.0;
  for (double x : down) var += (x - mean) * (x - mean);
  var /= static_cast<double>(down.size());
  if (!(var > 0.0)) throw NumericalError("sortino: downside variance is zero");
  return (raw_drr(r) - 1.0 - risk_free) / std::sqrt(var);
}

/// min_t (p_t / max_{s<=t} p_s - 1) * 100
inline double max_drawdown_pct(std::span<const double> p) {
  if (p.empty()) throw DataError("max drawdown: empty value series");
  double peak = p[0], md = 0.0;
  for (double v : p) {
    if (!(v > 0.0)) throw DataError("max drawdown: non-positive portfolio value");
    peak = std::max(peak, v);
    md = std::min(md, v / peak - 1.0);
  }
  return md * 100.0;
}

struct MetricBundle {
  double drr_pct = 0.0;
  double arr_pct = 0.0;
  /// Empty when the downside deviation is zero.
  std::optional<double> sortino;
  double max_drawdown_pct = 0.0;
  double raw_eq12 = 1.0;
  double raw_eq14 = 1.0;
  double final_value = 0.0;
  std::size_t days = 0;
};

inline MetricBundle metric_bundle(std::span<const double> r, std::span<const double> value_path) {
  MetricBundle m;
  m.raw_eq12 = raw_drr(r);
  m.drr_pct = (m.raw_eq12 - 1.0) * 100.0;
  const auto a = arr(r, value_path.front());
  m.raw_eq14 = a.raw;
  m.arr_pct = a.pct;
  m.final_value = value_path.back();
  try {
    m.sortino = sortino(r);
  } catch (const NumericalError&) {
  }
  m.max_drawdown_pct = max_drawdown_pct(value_path);
  m.days = r.size();
  return m;
}

inline MetricBundle metric_bundle(const sam::PortfolioLedger& l) {
  return metric_bundle(l.log_return, l.value_path());
}

}  // namespace mspm::metrics

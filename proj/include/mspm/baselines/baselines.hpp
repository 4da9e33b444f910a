#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/sam/accounting.hpp"

namespace mspm::baselines {

using sam::Weights;

enum class Kind { kCrp, kBah, kEg, kFtrl };

inline std::string kind_name(Kind k) {
  switch (k) {
    case Kind::kCrp: return "CRP";
    case Kind::kBah: return "BAH";
    case Kind::kEg: return "EG";
    case Kind::kFtrl: return "FTRL";
  }
  return "?";
}

inline Kind parse_kind(const std::string& s) {
  if (s == "CRP" || s == "crp") return Kind::kCrp;
  if (s == "BAH" || s == "bah") return Kind::kBah;
  if (s == "EG" || s == "eg") return Kind::kEg;
  if (s == "FTRL" || s == "ftrl") return Kind::kFtrl;
  throw ConfigError("unknown baseline '" + s + "' (expected CRP, BAH, EG or FTRL)");
}

struct BaselineSpec {
  Kind kind = Kind::kCrp;
  /// EG learning rate.
  double eta = 0.05;
  /// FTRL L2 strength.
  double regularization = 0.1;

  void validate() const {
    if (kind == Kind::kEg && !(eta >= 0.0)) throw ConfigError("EG eta must be >= 0");
    if (kind == Kind::kFtrl && !(regularization >= 0.0)) throw ConfigError("FTRL regularization must be >= 0");
  }
};

/// 1/N over the risky assets.
inline Weights crp_weights(std::size_t assets) {
  if (assets == 0) throw Error("crp: no assets");
  return Weights(assets, 1.0 / static_cast<double>(assets));
}

/// Buy-and-hold weights after each day of `ys` (risky components only).
inline std::vector<Weights> bah_weights(const Weights& a0, const std::vector<std::vector<double>>& ys) {
  std::vector<Weights> out;
  Weights w = a0;
  for (const auto& y : ys) {
    w = sam::drift_weights(w, y);
    out.push_back(w);
  }
  return out;
}

/// a_i proportional to w_i exp(eta y_i / (w . y)).
inline Weights eg_update(const Weights& w, const std::vector<double>& y, double eta) {
  if (w.size() != y.size()) throw ShapeError("eg_update: size mismatch");
  const double g = sam::dot(w, y);
  Weights a(w.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.size(); ++i) mx = std::max(mx, eta * y[i] / g);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += (a[i] = w[i] * std::exp(eta * y[i] / g - mx));
  for (auto& v : a) v /= s;
  return a;
}

/// Euclidean projection onto the probability simplex.
inline Weights project_to_simplex(const Weights& v) {
  Weights u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  Weights w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - theta, 0.0);
  return w;
}

/// sum_s ln(a . y_s) - (reg / 2) |a|^2
inline double ftrl_objective(const Weights& a, const std::vector<std::vector<double>>& ys, double reg) {
  double f = 0.0;
  for (const auto& y : ys) {
    const double g = sam::dot(a, y);
    if (!(g > 0.0)) return -std::numeric_limits<double>::infinity();
    f += std::log(g);
  }
  return f - 0.5 * reg * sam::dot(a, a);
}

struct FtrlSolverConfig {
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
};

/// Projected gradient ascent with backtracking from `start`.
inline Weights ftrl_update(const std::vector<std::vector<double>>& ys, double reg, Weights start = {},
                           const FtrlSolverConfig& cfg = {}) {
  if (ys.empty()) throw DataError("ftrl: needs at least one day of history");
  const std::size_t m = ys.front().size();
  Weights a = start.empty() ? crp_weights(m) : project_to_simplex(start);
  double f = ftrl_objective(a, ys, reg);
  double step = 1.0 / static_cast<double>(ys.size());
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    Weights grad(m, 0.0);
    for (const auto& y : ys) {
      const double g = sam::dot(a, y);
      for (std::size_t i = 0; i < m; ++i) grad[i] += y[i] / g;
    }
    for (std::size_t i = 0; i < m; ++i) grad[i] -= reg * a[i];
    Weights next;
    double fn = 0.0;
    for (;;) {
      Weights moved(m);
      for (std::size_t i = 0; i < m; ++i) moved[i] = a[i] + step * grad[i];
      next = project_to_simplex(moved);
      fn = ftrl_objective(next, ys, reg);
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        lin += grad[i] * (next[i] - a[i]);
        sq += (next[i] - a[i]) * (next[i] - a[i]);
      }
      if (fn >= f + lin - sq / (2.0 * step) || sq == 0.0) break;
      step *= 0.5;
      if (step < 1e-300) throw NumericalError("ftrl: line search failed");
    }
    double change = 0.0;
    for (std::size_t i = 0; i < m; ++i) change = std::max(change, std::abs(next[i] - a[i]));
    a = std::move(next);
    f = fn;
    if (change < cfg.tolerance) return a;
    step *= 2.0;
  }
  throw NumericalError("ftrl: no convergence within " + std::to_string(cfg.max_iterations) + " iterations");
}

inline Weights with_cash(const Weights& risky) {
  Weights w{0.0};
  w.insert(w.end(), risky.begin(), risky.end());
  return w;
}

inline std::vector<double> risky_part(const std::vector<double>& y) { return {y.begin() + 1, y.end()}; }

/// Runs a baseline through the shared accounting. It starts fully invested at 1/N
/// on `first_decision` and never holds cash.
inline sam::PortfolioLedger run_baseline(const BaselineSpec& spec, const std::vector<sam::SignalFrame>& frames,
                                         const sam::AccountingConfig& cfg, std::size_t first_decision) {
  spec.validate();
  sam::require_aligned(frames);
  const std::size_t m = frames.size();
  const Weights initial = with_cash(crp_weights(m));
  sam::AllocationPolicy policy;
  Weights prev = crp_weights(m);
  std::vector<std::vector<double>> history;
  switch (spec.kind) {
    case Kind::kCrp:
      policy = [m](std::size_t, const Weights&) { return with_cash(crp_weights(m)); };
      break;
    case Kind::kBah:
      policy = [](std::size_t, const Weights& held) { return held; };
      break;
    case Kind::kEg:
      policy = [&, first_decision](std::size_t t, const Weights&) {
        if (t > first_decision) prev = eg_update(prev, risky_part(sam::frame_relative_prices(frames, t)), spec.eta);
        return with_cash(prev);
      };
      break;
    case Kind::kFtrl:
      for (std::size_t s = 1; s <= first_decision; ++s) history.push_back(risky_part(sam::frame_relative_prices(frames, s)));
      policy = [&, first_decision](std::size_t t, const Weights&) {
        if (t > first_decision) history.push_back(risky_part(sam::frame_relative_prices(frames, t)));
        if (history.empty()) return with_cash(prev);
        prev = ftrl_update(history, spec.regularization, prev);
        return with_cash(prev);
      };
      break;
  }
  return sam::run_portfolio(frames, cfg, initial, first_decision, policy, kind_name(spec.kind));
}

}  // namespace mspm::baselines

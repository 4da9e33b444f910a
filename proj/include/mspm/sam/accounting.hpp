#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mspm/core/date.hpp"
#include "mspm/core/error.hpp"
#include "mspm/core/text.hpp"
#include "mspm/sam/state.hpp"

namespace mspm::sam {

using Weights = std::vector<double>;

/// y[0] = 1 for cash, y[i] = close_i(t) / close_i(t-1).
inline std::vector<double> relative_price_vector(std::span<const double> prev, std::span<const double> now) {
  if (prev.size() != now.size()) throw ShapeError("relative prices: size mismatch");
  std::vector<double> y(now.size() + 1, 1.0);
  for (std::size_t i = 0; i < now.size(); ++i) {
    if (!(prev[i] > 0.0) || !(now[i] > 0.0)) throw DataError("relative prices: non-positive close");
    y[i + 1] = now[i] / prev[i];
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Weights after prices move by y: (y * a) / (y . a).
inline Weights drift_weights(std::span<const double> a, std::span<const double> y) {
  if (a.size() != y.size()) throw ShapeError("drift_weights: size mismatch");
  const double g = dot(a, y);
  Weights w(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) w[i] = a[i] * y[i] / g;
  return w;
}

/// beta * sum |a - w|.
inline double transaction_cost(std::span<const double> a, std::span<const double> w, double beta) {
  if (a.size() != w.size()) throw ShapeError("transaction_cost: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - w[i]);
  return beta * s;
}

/// (1/n) sum over the last n relative-price vectors of sum_i (y_i - mean_i)^2.
inline double risk_penalty(const std::vector<std::vector<double>>& history, std::size_t n) {
  if (n == 0 || history.size() < n) throw DataError("risk_penalty: need " + std::to_string(n) + " days of history");
  const std::size_t first = history.size() - n;
  const std::size_t m = history.back().size();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t s = first; s < history.size(); ++s) mean += history[s][i];
    mean /= static_cast<double>(n);
    for (std::size_t s = first; s < history.size(); ++s) total += (history[s][i] - mean) * (history[s][i] - mean);
  }
  return total / static_cast<double>(n);
}

struct StepReward {
  double cost = 0.0;
  /// a . y
  double growth = 0.0;
  /// ln(a . y - cost - phi * sigma^2)
  double r_star = 0.0;
  /// ln(a . y - cost)
  double log_return = 0.0;
  /// False when a log argument is not positive; the values above are then NaN.
  bool ok = true;
};

inline StepReward sam_reward(std::span<const double> a, std::span<const double> y, std::span<const double> w_prior,
                             double beta, double phi, double sigma2) {
  StepReward r;
  r.cost = transaction_cost(a, w_prior, beta);
  r.growth = dot(a, y);
  const double net = r.growth - r.cost;
  const double risk_adj = net - phi * sigma2;
  if (!(net > 0.0) || !(risk_adj > 0.0)) {
    r.ok = false;
    r.r_star = r.log_return = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.log_return = std::log(net);
  r.r_star = std::log(risk_adj);
  return r;
}

inline bool on_simplex(std::span<const double> w, double tol = 1e-9) {
  double s = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

inline Weights all_cash(std::size_t rows) {
  Weights w(rows, 0.0);
  w[0] = 1.0;
  return w;
}

struct AccountingConfig {
  double commission = 0.0025;
  double risk_discount = 0.001;
  /// Window of relative-price vectors used for the risk penalty.
  std::size_t window = 50;
  double initial_value = 10000.0;
};

/// Daily record of a portfolio run. Row k describes the move into dates[k].
struct PortfolioLedger {
  std::string strategy;
  std::vector<std::string> assets;
  Date start_date;
  double initial_value = 10000.0;
  std::vector<Date> dates;
  std::vector<Weights> allocations;
  std::vector<Weights> drifted;
  std::vector<double> cost, log_return, r_star, value;

  std::size_t size() const { return dates.size(); }

  /// p_0 followed by every p_t.
  std::vector<double> value_path() const {
    std::vector<double> p{initial_value};
    p.insert(p.end(), value.begin(), value.end());
    return p;
  }

  /// Throws AccountingError unless p_t = p_0 exp(sum R) holds to `tol` (relative) everywhere.
  void verify(double tol = 1e-12) const {
    double sum = 0.0;
    for (std::size_t t = 0; t < size(); ++t) {
      sum += log_return[t];
      const double want = initial_value * std::exp(sum);
      if (std::abs(value[t] - want) > tol * std::max(1.0, std::abs(want))) {
        throw AccountingError(strategy + ": value recursion violated on " + dates[t].to_string());
      }
    }
  }
};

/// Applies allocations day by day with drift, proportional costs and the risk-adjusted reward.
class PortfolioSimulator {
 public:
  PortfolioSimulator(std::size_t rows, AccountingConfig cfg, Weights initial)
      : cfg_(cfg), w_(std::move(initial)), value_(cfg.initial_value) {
    if (w_.size() != rows || !on_simplex(w_)) throw Error("simulator: initial weights must be a simplex vector of size m*");
  }

  /// Rebalances to `a`, then moves prices by `y`. Returns the step reward; on a
  /// non-positive log argument the ledger is left untouched.
  StepReward step(const Date& date, const Weights& a, const std::vector<double>& y) {
    if (!on_simplex(a)) throw NumericalError("allocation off the simplex on " + date.to_string());
    y_history_.push_back(y);
    const double sigma2 = y_history_.size() >= cfg_.window ? risk_penalty(y_history_, cfg_.window) : 0.0;
    if (y_history_.size() > cfg_.window) y_history_.erase(y_history_.begin());
    StepReward r = sam_reward(a, y, w_, cfg_.commission, cfg_.risk_discount, sigma2);
    if (!r.ok) return r;
    value_ *= std::exp(r.log_return);
    w_ = drift_weights(a, y);
    ledger_.dates.push_back(date);
    ledger_.allocations.push_back(a);
    ledger_.drifted.push_back(w_);
    ledger_.cost.push_back(r.cost);
    ledger_.log_return.push_back(r.log_return);
    ledger_.r_star.push_back(r.r_star);
    ledger_.value.push_back(value_);
    return r;
  }

  /// Pre-loads relative-price history (the days before the first step).
  void seed_history(std::vector<std::vector<double>> ys) {
    y_history_ = std::move(ys);
    while (y_history_.size() > cfg_.window) y_history_.erase(y_history_.begin());
  }

  const Weights& weights() const { return w_; }
  double value() const { return value_; }
  PortfolioLedger& ledger() { return ledger_; }

 private:
  AccountingConfig cfg_;
  Weights w_;
  double value_;
  std::vector<std::vector<double>> y_history_;
  PortfolioLedger ledger_;
};

/// Relative price vector between frame rows t-1 and t.
inline std::vector<double> frame_relative_prices(const std::vector<SignalFrame>& frames, std::size_t t) {
  std::vector<double> prev, now;
  for (const auto& f : frames) {
    prev.push_back(f.close[t - 1]);
    now.push_back(f.close[t]);
  }
  return relative_price_vector(prev, now);
}

/// Allocation rule: decision row t, weights currently held -> target weights (length m*).
using AllocationPolicy = std::function<Weights(std::size_t t, const Weights& held)>;

/// Runs `policy` over frame rows [first_decision, size-2], realizing each decision on the next row.
inline PortfolioLedger run_portfolio(const std::vector<SignalFrame>& frames, const AccountingConfig& cfg,
                                     const Weights& initial, std::size_t first_decision, const AllocationPolicy& policy,
                                     const std::string& strategy) {
  require_aligned(frames);
  const std::size_t len = frames.front().size();
  if (first_decision + 1 >= len) throw DataError(strategy + ": no trading days after the warm-up window");
  PortfolioSimulator sim(frames.size() + 1, cfg, initial);
  std::vector<std::vector<double>> seed;
  for (std::size_t s = 1; s <= first_decision; ++s) seed.push_back(frame_relative_prices(frames, s));
  sim.seed_history(std::move(seed));
  auto& ledger = sim.ledger();
  ledger.strategy = strategy;
  for (const auto& f : frames) ledger.assets.push_back(f.symbol);
  ledger.start_date = frames.front().dates[first_decision];
  ledger.initial_value = cfg.initial_value;
  for (std::size_t t = first_decision; t + 1 < len; ++t) {
    const Weights a = policy(t, sim.weights());
    const auto y = frame_relative_prices(frames, t + 1);
    const auto r = sim.step(frames.front().dates[t + 1], a, y);
    if (!r.ok) {
      throw NumericalError(strategy + ": non-positive log argument (catastrophic loss) on " +
                           frames.front().dates[t + 1].to_string());
    }
  }
  ledger.verify();
  return std::move(ledger);
}

/// `date,<strategy?>,w_cash,w_<asset>...,cost,R_t,r_star_t,p_t`
inline std::string ledger_csv(const PortfolioLedger& l, bool with_strategy = false) {
  std::string out = with_strategy ? "strategy,date" : "date";
  out += ",w_cash";
  for (const auto& a : l.assets) out += ",w_" + a;
  out += ",cost,R_t,r_star_t,p_t\n";
  for (std::size_t t = 0; t < l.size(); ++t) {
    if (with_strategy) out += l.strategy + ",";
    out += l.dates[t].to_string();
    for (double w : l.allocations[t]) out += "," + text::format_double(w);
    out += "," + text::format_double(l.cost[t]) + "," + text::format_double(l.log_return[t]) + "," +
           text::format_double(l.r_star[t]) + "," + text::format_double(l.value[t]) + "\n";
  }
  return out;
}

}  // namespace mspm::sam

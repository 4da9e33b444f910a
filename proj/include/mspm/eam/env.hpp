#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/data/transform.hpp"
#include "mspm/data/types.hpp"

namespace mspm::eam {

enum class TradeAction : int { Buy = 0, Close = 1, Skip = 2 };
inline constexpr int kNumActions = 3;

/// Signal channel encoding: Buy 1, Close -1, Skip 0.
inline int signal_code(TradeAction a) {
  switch (a) {
    case TradeAction::Buy: return 1;
    case TradeAction::Close: return -1;
    default: return 0;
  }
}

inline const char* action_name(TradeAction a) {
  switch (a) {
    case TradeAction::Buy: return "buy";
    case TradeAction::Close: return "close";
    default: return "skip";
  }
}

/// Column view of one asset's normalized, gap-filled series.
struct MarketData {
  std::string symbol;
  std::vector<Date> dates;
  std::vector<double> open, high, low, close, volume, sentiment, news_buzz;

  std::size_t size() const { return close.size(); }

  static MarketData from_series(const data::AssetSeries& raw) {
    data::AssetSeries s = data::fill_sentiment_gaps(data::normalize(raw));
    MarketData m;
    m.symbol = s.symbol;
    for (std::size_t i = 0; i < s.bars.size(); ++i) {
      const auto& b = s.bars[i];
      m.dates.push_back(b.date);
      m.open.push_back(b.open);
      m.high.push_back(b.high);
      m.low.push_back(b.low);
      m.close.push_back(b.close);
      m.volume.push_back(b.volume);
      m.sentiment.push_back(s.sentiments[i].sentiment);
      m.news_buzz.push_back(s.sentiments[i].news_buzz);
    }
    return m;
  }
};

struct ClosedTrade {
  std::size_t entry_index = 0;
  std::size_t exit_index = 0;
  double entry_price = 0.0;
  double exit_price = 0.0;

  double ret() const { return exit_price / entry_price - 1.0; }
};

/// Long-only, single-position book. Illegal requests degrade to Skip.
class PositionLedger {
 public:
  /// Applies `requested` at step `index` priced at `price`; returns the action taken.
  TradeAction apply(TradeAction requested, std::size_t index, double price) {
    if (requested == TradeAction::Buy && !open_) {
      open_ = true;
      entry_index_ = index;
      entry_price_ = price;
      return TradeAction::Buy;
    }
    if (requested == TradeAction::Close && open_) {
      open_ = false;
      trades_.push_back({entry_index_, index, entry_price_, price});
      return TradeAction::Close;
    }
    return TradeAction::Skip;
  }

  bool open() const { return open_; }
  std::size_t entry_index() const { return entry_index_; }
  double entry_price() const { return entry_price_; }
  const std::vector<ClosedTrade>& trades() const { return trades_; }

 private:
  bool open_ = false;
  std::size_t entry_index_ = 0;
  double entry_price_ = 0.0;
  std::vector<ClosedTrade> trades_;
};

struct EnvConfig {
  /// Days of history in each observation window.
  std::size_t window = 50;
  std::size_t episode_length = 250;
  double commission = 0.0025;
  double reward_scale = 100.0;
};

/// Compact observation: everything needed to rebuild the network input from MarketData.
struct EamObservation {
  /// Last day inside the window.
  std::size_t index = 0;
  bool position_open = false;
  std::uint32_t bars_held = 0;

  friend bool operator==(const EamObservation&, const EamObservation&) = default;
};

struct StepResult {
  EamObservation next;
  double reward = 0.0;
  bool done = false;
  TradeAction taken = TradeAction::Skip;
};

/// Single-asset trading environment.
///
/// An action chosen at day t is executed at close_t. Opening or closing costs
/// reward_scale * commission; holding over t -> t+1 earns
/// reward_scale * (close_{t+1} / close_t - 1). Flat days earn 0.
class TradingEnv {
 public:
  TradingEnv(const MarketData& market, EnvConfig cfg) : market_(&market), cfg_(cfg) {
    if (cfg_.window == 0 || cfg_.episode_length == 0) throw ConfigError("env: window and episode_length must be positive");
    if (market.size() < cfg_.window + cfg_.episode_length) {
      throw DataError(market.symbol + ": series of " + std::to_string(market.size()) + " days is too short for window " +
                      std::to_string(cfg_.window) + " plus episode length " + std::to_string(cfg_.episode_length));
    }
  }

  std::size_t first_start() const { return cfg_.window - 1; }
  std::size_t last_start() const { return market_->size() - 1 - cfg_.episode_length; }

  /// Uniform random start over all starts that leave a full episode ahead.
  EamObservation reset(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(first_start(), last_start());
    return reset_at(pick(rng));
  }

  EamObservation reset_at(std::size_t start) {
    if (start < first_start() || start > last_start()) throw DataError("env: start index out of range");
    ledger_ = PositionLedger{};
    index_ = start;
    steps_ = 0;
    return observation();
  }

  StepResult step(TradeAction requested) {
    const auto& close = market_->close;
    StepResult r;
    r.taken = ledger_.apply(requested, index_, close[index_]);
    const double unit = cfg_.reward_scale * cfg_.commission;
    if (r.taken != TradeAction::Skip) r.reward -= unit;
    if (ledger_.open()) r.reward += cfg_.reward_scale * (close[index_ + 1] / close[index_] - 1.0);
    ++index_;
    ++steps_;
    r.done = steps_ >= cfg_.episode_length || index_ + 1 >= market_->size();
    r.next = observation();
    return r;
  }

  EamObservation observation() const {
    EamObservation o;
    o.index = index_;
    o.position_open = ledger_.open();
    o.bars_held = ledger_.open() ? static_cast<std::uint32_t>(index_ - ledger_.entry_index()) : 0;
    return o;
  }

  const PositionLedger& ledger() const { return ledger_; }
  const EnvConfig& config() const { return cfg_; }
  const MarketData& market() const { return *market_; }

 private:
  const MarketData* market_;
  EnvConfig cfg_;
  PositionLedger ledger_;
  std::size_t index_ = 0;
  std::size_t steps_ = 0;
};

/// With probability epsilon a uniform action, else the argmax (lowest index wins ties).
template <class Values>
int act_epsilon_greedy(const Values& q, double epsilon, std::mt19937_64& rng) {
  const int n = static_cast<int>(std::size(q));
  if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
    return std::uniform_int_distribution<int>(0, n - 1)(rng);
  }
  int best = 0;
  for (int a = 1; a < n; ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

/// Linear decay from `start` to `end` over `steps` steps, then flat.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.02;
  std::size_t steps = 10000;

  double at(std::size_t step) const {
    if (steps == 0 || step >= steps) return end;
    return start + (end - start) * static_cast<double>(step) / static_cast<double>(steps);
  }
};

}  // namespace mspm::eam

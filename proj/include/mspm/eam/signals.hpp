#pragma once

#include <string>
#include <vector>

#include "mspm/core/text.hpp"
#include "mspm/data/csv_io.hpp"
#include "mspm/eam/dqn.hpp"
#include "mspm/eam/env.hpp"
#include "mspm/eam/qnetwork.hpp"

namespace mspm::eam {

/// Prices with one EAM signal per day (Buy 1, Close -1, Skip 0).
struct SignalFrame {
  std::string symbol;
  std::vector<Date> dates;
  std::vector<double> open, high, low, close, volume;
  std::vector<int> signal;

  std::size_t size() const { return dates.size(); }

  friend bool operator==(const SignalFrame&, const SignalFrame&) = default;
};

/// Greedy signals from day `first` to the end of `market`. The ledger starts flat
/// at `first`; illegal greedy choices are emitted as Skip.
template <class Model>
SignalFrame generate_signals(const Model& model, const MarketData& market, std::size_t first,
                             const QNetworkConfig& cfg) {
  if (first + 1 < cfg.window) {
    throw DataError(market.symbol + ": insufficient history, signals need " + std::to_string(cfg.window) +
                    " days up to the first signal day");
  }
  if (first >= market.size()) throw DataError(market.symbol + ": first signal day beyond series");
  SignalFrame f;
  f.symbol = market.symbol;
  PositionLedger ledger;
  for (std::size_t t = first; t < market.size(); ++t) {
    EamObservation obs{t, ledger.open(),
                       ledger.open() ? static_cast<std::uint32_t>(t - ledger.entry_index()) : 0u};
    const auto q = model.forward(make_state(market, obs, cfg));
    const auto taken = ledger.apply(static_cast<TradeAction>(argmax(q)), t, market.close[t]);
    f.dates.push_back(market.dates[t]);
    f.open.push_back(market.open[t]);
    f.high.push_back(market.high[t]);
    f.low.push_back(market.low[t]);
    f.close.push_back(market.close[t]);
    f.volume.push_back(market.volume[t]);
    f.signal.push_back(signal_code(taken));
  }
  return f;
}

/// Frame with every signal set to 0, prices untouched.
inline SignalFrame without_signals(SignalFrame f) {
  std::fill(f.signal.begin(), f.signal.end(), 0);
  return f;
}

/// Whole-series frame with all-zero signals (for the EAM-disabled variant and baselines).
inline SignalFrame frame_without_signals(const MarketData& m, std::size_t first = 0) {
  SignalFrame f;
  f.symbol = m.symbol;
  for (std::size_t t = first; t < m.size(); ++t) {
    f.dates.push_back(m.dates[t]);
    f.open.push_back(m.open[t]);
    f.high.push_back(m.high[t]);
    f.low.push_back(m.low[t]);
    f.close.push_back(m.close[t]);
    f.volume.push_back(m.volume[t]);
    f.signal.push_back(0);
  }
  return f;
}

inline std::string signal_frame_csv(const SignalFrame& f) {
  std::string out = "date,open,high,low,close,volume,signal\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    out += f.dates[i].to_string() + "," + text::format_double(f.open[i]) + "," + text::format_double(f.high[i]) + "," +
           text::format_double(f.low[i]) + "," + text::format_double(f.close[i]) + "," + text::format_double(f.volume[i]) + "," +
           std::to_string(f.signal[i]) + "\n";
  }
  return out;
}

inline SignalFrame parse_signal_frame_csv(std::string_view content, const std::string& symbol,
                                          const std::string& source = "<signals>") {
  auto lines = data::detail::split_lines(content);
  if (lines.empty()) throw DataError(source + ": empty file");
  data::detail::expect_header(lines[0], {"date", "open", "high", "low", "close", "volume", "signal"}, source);
  SignalFrame f;
  f.symbol = symbol;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    auto cells = text::split_csv(lines[i]);
    if (cells.size() != 7) throw data::detail::row_error(source, i + 1, "expected 7 fields");
    double v[5];
    for (int k = 0; k < 5; ++k) {
      if (!text::parse_double(cells[k + 1], v[k])) throw data::detail::row_error(source, i + 1, "bad number");
    }
    double s;
    if (!text::parse_double(cells[6], s) || (s != -1 && s != 0 && s != 1)) {
      throw data::detail::row_error(source, i + 1, "signal must be -1, 0 or 1");
    }
    try {
      f.dates.push_back(Date::parse(cells[0]));
    } catch (const Error&) {
      throw data::detail::row_error(source, i + 1, "bad date");
    }
    f.open.push_back(v[0]);
    f.high.push_back(v[1]);
    f.low.push_back(v[2]);
    f.close.push_back(v[3]);
    f.volume.push_back(v[4]);
    f.signal.push_back(static_cast<int>(s));
  }
  return f;
}

struct PositionStats {
  std::size_t entry_index = 0;
  std::size_t exit_index = 0;
  double entry_price = 0.0;
  double exit_price = 0.0;
  bool winning = false;
  /// Position return in percent.
  double arr_pct = 0.0;
};

struct PositionReport {
  std::size_t positions = 0;
  std::size_t winning = 0;
  /// Percent; 0 when no position closed.
  double winning_rate_pct = 0.0;
  bool open_at_end = false;
  std::vector<PositionStats> detail;
};

/// Positions run from a Buy signal to the next Close signal, both at that day's close.
inline PositionReport position_report(const SignalFrame& f) {
  PositionReport r;
  bool open = false;
  std::size_t entry = 0;
  for (std::size_t t = 0; t < f.size(); ++t) {
    if (f.signal[t] == 1) {
      if (open) throw DataError(f.symbol + ": Buy signal while a position is open on " + f.dates[t].to_string());
      open = true;
      entry = t;
    } else if (f.signal[t] == -1) {
      if (!open) throw DataError(f.symbol + ": Close signal without an open position on " + f.dates[t].to_string());
      open = false;
      PositionStats p{entry, t, f.close[entry], f.close[t], f.close[t] > f.close[entry],
                      (f.close[t] / f.close[entry] - 1.0) * 100.0};
      r.winning += p.winning ? 1 : 0;
      r.detail.push_back(p);
    }
  }
  r.positions = r.detail.size();
  r.open_at_end = open;
  if (r.positions) r.winning_rate_pct = 100.0 * static_cast<double>(r.winning) / static_cast<double>(r.positions);
  return r;
}

}  // namespace mspm::eam

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mspm/core/error.hpp"
#include "mspm/core/text.hpp"
#include "mspm/data/csv_io.hpp"
#include "mspm/metrics/performance.hpp"
#include "mspm/sam/accounting.hpp"

namespace mspm::pipeline {

/// Reads a ledger written by `sam::ledger_csv(l, true)`. The file has no start row, so
/// p_0 and the first decision date come from the caller.
inline sam::PortfolioLedger parse_ledger_csv(std::string_view content, double initial_value, Date start_date,
                                             const std::string& source = "<ledger>") {
  auto lines = data::detail::split_lines(content);
  if (lines.empty()) throw DataError(source + ": empty ledger");
  const auto header = text::split_csv(lines[0]);
  if (header.size() < 7 || header[0] != "strategy" || header[1] != "date" || header[2] != "w_cash" ||
      header[header.size() - 4] != "cost" || header.back() != "p_t") {
    throw DataError(source + ": not a ledger file");
  }
  sam::PortfolioLedger l;
  l.initial_value = initial_value;
  l.start_date = start_date;
  const std::size_t rows = header.size() - 6;
  for (std::size_t k = 3; k < 2 + rows; ++k) l.assets.emplace_back(header[k].substr(2));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto cells = text::split_csv(lines[i]);
    if (cells.size() != header.size()) throw data::detail::row_error(source, i + 1, "wrong field count");
    l.strategy = std::string(cells[0]);
    l.dates.push_back(Date::parse(cells[1]));
    std::vector<double> v(cells.size() - 2);
    for (std::size_t k = 2; k < cells.size(); ++k) {
      if (!text::parse_double(cells[k], v[k - 2])) throw data::detail::row_error(source, i + 1, "bad number");
    }
    l.allocations.emplace_back(v.begin(), v.begin() + static_cast<long>(rows));
    l.cost.push_back(v[rows]);
    l.log_return.push_back(v[rows + 1]);
    l.r_star.push_back(v[rows + 2]);
    l.value.push_back(v[rows + 3]);
  }
  if (l.dates.empty()) throw DataError(source + ": ledger has no rows");
  return l;
}

inline constexpr const char* kMetricNames[] = {"DRR_pct", "ARR_pct", "MD_pct", "SR"};

inline std::optional<double> metric_value(const metrics::MetricBundle& m, const std::string& name) {
  if (name == "DRR_pct") return m.drr_pct;
  if (name == "ARR_pct") return m.arr_pct;
  if (name == "MD_pct") return m.max_drawdown_pct;
  if (name == "SR") return m.sortino;
  throw Error("unknown metric '" + name + "'");
}

struct ComparisonTable {
  std::vector<std::string> strategies;
  std::vector<metrics::MetricBundle> bundles;
  /// Metric name -> strategies holding the best value (ties share the flag).
  std::map<std::string, std::vector<std::string>> best;

  bool is_best(const std::string& metric, const std::string& strategy) const {
    const auto it = best.find(metric);
    return it != best.end() && std::find(it->second.begin(), it->second.end(), strategy) != it->second.end();
  }
};

inline void require_same_dates(const std::vector<sam::PortfolioLedger>& ledgers) {
  for (const auto& l : ledgers) {
    if (l.dates != ledgers.front().dates) {
      throw DataError("compare: " + l.strategy + " covers different dates than " + ledgers.front().strategy);
    }
  }
}

/// Metric grid over aligned ledgers. Larger is better for every metric (MD is negative).
inline ComparisonTable compare_ledgers(const std::vector<sam::PortfolioLedger>& ledgers) {
  if (ledgers.empty()) throw DataError("compare: no ledgers");
  require_same_dates(ledgers);
  ComparisonTable t;
  for (const auto& l : ledgers) {
    t.strategies.push_back(l.strategy);
    t.bundles.push_back(metrics::metric_bundle(l));
  }
  for (const char* name : kMetricNames) {
    std::optional<double> top;
    for (const auto& b : t.bundles) {
      const auto v = metric_value(b, name);
      if (v && (!top || *v > *top)) top = v;
    }
    auto& winners = t.best[name];
    for (std::size_t i = 0; i < t.bundles.size(); ++i) {
      const auto v = metric_value(t.bundles[i], name);
      if (v && top && *v == *top) winners.push_back(t.strategies[i]);
    }
  }
  return t;
}

/// Long format: `metric,strategy,value,best`. Missing Sortino values are left blank.
inline std::string comparison_csv(const ComparisonTable& t) {
  std::string out = "metric,strategy,value,best\n";
  for (const char* name : kMetricNames) {
    for (std::size_t i = 0; i < t.strategies.size(); ++i) {
      const auto v = metric_value(t.bundles[i], name);
      out += std::string(name) + "," + t.strategies[i] + "," + (v ? text::format_double(*v) : "") + "," +
             (t.is_best(name, t.strategies[i]) ? "1" : "0") + "\n";
    }
  }
  return out;
}

/// Fixed-width table in the usual publication rounding, best cells starred.
inline std::string comparison_text(const ComparisonTable& t) {
  auto pad = [](const std::string& s) { return std::string(12 - std::min<std::size_t>(12, s.size()), ' ') + s; };
  std::string out = "metric ";
  for (const auto& s : t.strategies) out += " " + pad(s);
  out += "\n";
  const std::pair<const char*, int> rows[] = {{"DRR_pct", 3}, {"ARR_pct", 1}, {"MD_pct", 1}, {"SR", 2}};
  for (const auto& [name, decimals] : rows) {
    std::string line = name;
    line.resize(7, ' ');
    for (std::size_t i = 0; i < t.strategies.size(); ++i) {
      const auto v = metric_value(t.bundles[i], name);
      std::string cell = v ? text::fixed(*v, decimals) : "n/a";
      if (t.is_best(name, t.strategies[i])) cell += "*";
      line += " " + pad(cell);
    }
    out += line + "\n";
  }
  return out;
}

/// `date,<strategy>...` with p_t; the first row is the start date at p_0.
inline std::string value_curves_csv(const std::vector<sam::PortfolioLedger>& ledgers) {
  require_same_dates(ledgers);
  std::string out = "date";
  for (const auto& l : ledgers) out += "," + l.strategy;
  out += "\n";
  const auto& ref = ledgers.front();
  out += ref.start_date.to_string();
  for (const auto& l : ledgers) out += "," + text::format_double(l.initial_value);
  out += "\n";
  for (std::size_t t = 0; t < ref.size(); ++t) {
    out += ref.dates[t].to_string();
    for (const auto& l : ledgers) out += "," + text::format_double(l.value[t]);
    out += "\n";
  }
  return out;
}

/// Percent below the running peak of p (p_0 included), one entry per element of `value_path`.
inline std::vector<double> underwater(std::span<const double> value_path) {
  std::vector<double> out;
  double peak = 0.0;
  for (double v : value_path) {
    peak = std::max(peak, v);
    out.push_back((v / peak - 1.0) * 100.0);
  }
  return out;
}

inline std::string underwater_csv(const std::vector<sam::PortfolioLedger>& ledgers) {
  require_same_dates(ledgers);
  std::vector<std::vector<double>> series;
  for (const auto& l : ledgers) series.push_back(underwater(l.value_path()));
  std::string out = "date";
  for (const auto& l : ledgers) out += "," + l.strategy;
  out += "\n";
  const auto& ref = ledgers.front();
  for (std::size_t t = 0; t <= ref.size(); ++t) {
    out += (t == 0 ? ref.start_date : ref.dates[t - 1]).to_string();
    for (const auto& s : series) out += "," + text::format_double(s[t]);
    out += "\n";
  }
  return out;
}

inline nlohmann::json bundle_json(const metrics::MetricBundle& m) {
  nlohmann::json j = {{"DRR_pct", m.drr_pct},          {"ARR_pct", m.arr_pct},   {"MD_pct", m.max_drawdown_pct},
                      {"raw_daily_gross_mean", m.raw_eq12}, {"raw_accumulated", m.raw_eq14},
                      {"final_value", m.final_value}, {"days", m.days}};
  j["SR"] = m.sortino ? nlohmann::json(*m.sortino) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json comparison_json(const ComparisonTable& t) {
  nlohmann::json j;
  for (std::size_t i = 0; i < t.strategies.size(); ++i) j["strategies"][t.strategies[i]] = bundle_json(t.bundles[i]);
  j["best"] = t.best;
  return j;
}

}  // namespace mspm::pipeline

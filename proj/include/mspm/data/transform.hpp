#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/data/types.hpp"

namespace mspm::data {

/// Joins bars and sentiment into a series. Sentiment on non-trading days is dropped;
/// trading days without sentiment stay missing until `fill_sentiment_gaps`.
inline AssetSeries make_series(std::string symbol, std::vector<AssetBar> bars,
                               std::vector<SentimentRecord> sentiments) {
  auto by_date = [](const auto& a, const auto& b) { return a.date < b.date; };
  std::sort(bars.begin(), bars.end(), by_date);
  std::sort(sentiments.begin(), sentiments.end(), by_date);
  std::set<Date> trading;
  for (const auto& b : bars) trading.insert(b.date);
  std::erase_if(sentiments, [&](const SentimentRecord& r) { return !trading.contains(r.date); });
  return AssetSeries{std::move(symbol), std::move(bars), std::move(sentiments), std::nullopt};
}

/// Gives every bar date a sentiment record; inserted ones are neutral (0) and flagged.
inline AssetSeries fill_sentiment_gaps(AssetSeries series) {
  std::vector<SentimentRecord> filled;
  filled.reserve(series.bars.size());
  std::size_t j = 0;
  for (const auto& bar : series.bars) {
    while (j < series.sentiments.size() && series.sentiments[j].date < bar.date) ++j;
    if (j < series.sentiments.size() && series.sentiments[j].date == bar.date) {
      filled.push_back(series.sentiments[j]);
    } else {
      filled.push_back(SentimentRecord{bar.date, 0.0, kImputedNewsBuzz, true});
    }
  }
  series.sentiments = std::move(filled);
  return series;
}

/// Inserted records divided by total records.
inline double imputed_fraction(const AssetSeries& series) {
  if (series.sentiments.empty()) return 0.0;
  auto n = std::count_if(series.sentiments.begin(), series.sentiments.end(),
                         [](const SentimentRecord& r) { return r.imputed; });
  return static_cast<double>(n) / static_cast<double>(series.sentiments.size());
}

/// Divides every price/volume feature by its day-one value. Already-normalized
/// input is returned unchanged.
inline AssetSeries normalize(AssetSeries series) {
  if (series.normalized()) return series;
  if (series.bars.empty()) throw DataError(series.symbol + ": cannot normalize an empty series");
  const AssetBar& first = series.bars.front();
  if (first.open <= 0 || first.high <= 0 || first.low <= 0 || first.close <= 0) {
    throw DataError(series.symbol + ": non-positive day-one price");
  }
  if (first.volume <= 0) throw DataError(series.symbol + ": zero day-one volume, cannot normalize");
  NormalizationBase base{first.open, first.high, first.low, first.close, first.volume};
  for (auto& b : series.bars) {
    b.open /= base.open;
    b.high /= base.high;
    b.low /= base.low;
    b.close /= base.close;
    b.volume /= base.volume;
  }
  series.normalization_base = base;
  return series;
}

inline AssetSeries denormalize(AssetSeries series) {
  if (!series.normalized()) return series;
  const auto base = *series.normalization_base;
  for (auto& b : series.bars) {
    b.open *= base.open;
    b.high *= base.high;
    b.low *= base.low;
    b.close *= base.close;
    b.volume *= base.volume;
  }
  series.normalization_base.reset();
  return series;
}

namespace detail {

template <class Row, class Keep>
std::vector<Row> filter_rows(const std::vector<Row>& rows, Keep&& keep) {
  std::vector<Row> out;
  for (const auto& r : rows) {
    if (keep(r.date)) out.push_back(r);
  }
  return out;
}

}  // namespace detail

/// Restricts every series to the dates they all share.
inline std::vector<AssetSeries> align_calendar(std::vector<AssetSeries> set) {
  if (set.empty()) throw DataError("align_calendar: no series given");
  std::set<Date> common;
  for (const auto& b : set.front().bars) common.insert(b.date);
  for (std::size_t i = 1; i < set.size(); ++i) {
    std::set<Date> next;
    for (const auto& b : set[i].bars) {
      if (common.contains(b.date)) next.insert(b.date);
    }
    common = std::move(next);
  }
  if (common.empty()) throw DataError("align_calendar: trading calendars do not intersect");
  auto keep = [&](const Date& d) { return common.contains(d); };
  for (auto& s : set) {
    s.bars = detail::filter_rows(s.bars, keep);
    s.sentiments = detail::filter_rows(s.sentiments, keep);
  }
  return set;
}

/// Rows of `series` whose dates fall inside `range`. Normalization base is kept.
inline AssetSeries slice(const AssetSeries& series, const DateRange& range) {
  AssetSeries out{series.symbol, {}, {}, series.normalization_base};
  auto keep = [&](const Date& d) { return range.contains(d); };
  out.bars = detail::filter_rows(series.bars, keep);
  out.sentiments = detail::filter_rows(series.sentiments, keep);
  return out;
}

/// Ordering and disjointness checks for both tiers of a split.
inline void validate_split(const DatasetSplit& s) {
  const std::pair<const char*, const DateRange*> all[] = {{"eam_train", &s.eam_train},
                                                          {"eam_predict", &s.eam_predict},
                                                          {"sam_train", &s.sam_train},
                                                          {"sam_validate", &s.sam_validate},
                                                          {"sam_experiment", &s.sam_experiment}};
  for (const auto& [name, r] : all) {
    if (r->last < r->first) throw DataError(std::string("split range ") + name + " ends before it starts");
  }
  if (!(s.eam_train.last < s.eam_predict.first)) throw DataError("split: eam_train must precede eam_predict");
  if (!(s.sam_train.last < s.sam_validate.first) || !(s.sam_validate.last < s.sam_experiment.first)) {
    throw DataError("split: sam_train, sam_validate, sam_experiment must be ordered and disjoint");
  }
  if (s.sam_train.first < s.eam_predict.first || s.eam_predict.last < s.sam_experiment.last) {
    throw DataError("split: allocation ranges must lie inside eam_predict");
  }
}

/// Cuts every series into the five named subsets. Each requested range must hold rows.
inline SplitSubsets split(const std::vector<AssetSeries>& set, const DatasetSplit& ranges) {
  validate_split(ranges);
  SplitSubsets out;
  const std::pair<const DateRange*, std::vector<AssetSeries>*> parts[] = {
      {&ranges.eam_train, &out.eam_train},
      {&ranges.eam_predict, &out.eam_predict},
      {&ranges.sam_train, &out.sam_train},
      {&ranges.sam_validate, &out.sam_validate},
      {&ranges.sam_experiment, &out.sam_experiment}};
  for (const auto& s : set) {
    for (const auto& [range, target] : parts) {
      auto piece = slice(s, *range);
      if (piece.empty()) {
        throw DataError(s.symbol + ": no rows in range " + range->first.to_string() + ".." +
                        range->last.to_string());
      }
      target->push_back(std::move(piece));
    }
  }
  return out;
}

/// Index of the first bar dated on or after `d`, or size() if none.
inline std::size_t lower_index(const AssetSeries& s, const Date& d) {
  auto it = std::lower_bound(s.bars.begin(), s.bars.end(), d,
                             [](const AssetBar& b, const Date& x) { return b.date < x; });
  return static_cast<std::size_t>(it - s.bars.begin());
}

}  // namespace mspm::data

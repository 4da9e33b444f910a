#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mspm/core/date.hpp"

namespace mspm::data {

/// One end-of-day OHLCV row (adjusted prices).
struct AssetBar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  friend bool operator==(const AssetBar&, const AssetBar&) = default;
};

/// Daily news sentiment. `sentiment` in [-5, 5]; `news_buzz` in [1, 10] unless imputed.
struct SentimentRecord {
  Date date;
  double sentiment = 0.0;
  double news_buzz = 0.0;
  bool imputed = false;

  friend bool operator==(const SentimentRecord&, const SentimentRecord&) = default;
};

inline constexpr double kSentimentMin = -5.0;
inline constexpr double kSentimentMax = 5.0;
inline constexpr double kNewsBuzzMin = 1.0;
inline constexpr double kNewsBuzzMax = 10.0;
/// news_buzz value written into gap-filled records.
inline constexpr double kImputedNewsBuzz = 0.0;

/// Day-one raw values used to normalize (and invert) each price/volume feature.
struct NormalizationBase {
  double open = 1.0;
  double high = 1.0;
  double low = 1.0;
  double close = 1.0;
  double volume = 1.0;

  friend bool operator==(const NormalizationBase&, const NormalizationBase&) = default;
};

struct AssetSeries {
  std::string symbol;
  std::vector<AssetBar> bars;
  std::vector<SentimentRecord> sentiments;
  /// Present once the series has been normalized.
  std::optional<NormalizationBase> normalization_base;

  std::size_t size() const { return bars.size(); }
  bool empty() const { return bars.empty(); }
  bool normalized() const { return normalization_base.has_value(); }

  std::vector<Date> dates() const {
    std::vector<Date> out;
    out.reserve(bars.size());
    for (const auto& b : bars) out.push_back(b.date);
    return out;
  }

  std::vector<double> closes() const {
    std::vector<double> out;
    out.reserve(bars.size());
    for (const auto& b : bars) out.push_back(b.close);
    return out;
  }

  friend bool operator==(const AssetSeries&, const AssetSeries&) = default;
};

/// The five chronological ranges used by the two training tiers.
///
/// The signal tier (eam_train, eam_predict) and the allocation tier
/// (sam_train, sam_validate, sam_experiment) are each ordered and disjoint;
/// the allocation tier lives inside eam_predict.
struct DatasetSplit {
  DateRange eam_train;
  DateRange eam_predict;
  DateRange sam_train;
  DateRange sam_validate;
  DateRange sam_experiment;

  static DatasetSplit paper_default() {
    return {{Date(2009, 1, 1), Date(2015, 12, 31)},
            {Date(2016, 1, 1), Date(2020, 12, 31)},
            {Date(2016, 1, 1), Date(2018, 12, 31)},
            {Date(2019, 1, 1), Date(2019, 12, 31)},
            {Date(2020, 1, 1), Date(2020, 12, 31)}};
  }

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Subsets produced by `split`, one vector of series per named range.
struct SplitSubsets {
  std::vector<AssetSeries> eam_train;
  std::vector<AssetSeries> eam_predict;
  std::vector<AssetSeries> sam_train;
  std::vector<AssetSeries> sam_validate;
  std::vector<AssetSeries> sam_experiment;
};

/// One constant-parameter stretch of a synthetic asset path.
struct RegimeSegment {
  std::size_t length = 20;
  /// Mean daily log-return.
  double drift = 0.0;
  /// Standard deviation of the daily log-return.
  double volatility = 0.0;
  /// Mean sentiment emitted the day before a day of this regime.
  double sentiment_bias = 0.0;

  friend bool operator==(const RegimeSegment&, const RegimeSegment&) = default;
};

struct SyntheticMarketSpec {
  std::size_t num_assets = 1;
  /// Trading days per asset.
  std::size_t length = 500;
  /// Rolling window the data will feed; length must be at least twice this.
  std::size_t window = 50;
  /// One regime plan per asset; a plan shorter than `length` is cycled.
  /// A single plan is shared by all assets.
  std::vector<std::vector<RegimeSegment>> regimes;
  /// When positive, segment lengths are redrawn geometrically with this mean
  /// every cycle, keeping each segment's drift/volatility/bias.
  double random_segment_mean = 0.0;
  /// Scales how strongly sentiment tracks the next day's regime bias.
  double sentiment_correlation = 1.0;
  double sentiment_noise = 0.5;
  double volume_noise = 0.1;
  double base_volume = 1.0e6;
  double initial_price = 100.0;
  /// Fraction of sentiment records randomly dropped (exercises gap filling).
  double sentiment_missing_fraction = 0.0;
  Date start_date = Date(2009, 1, 2);
  std::vector<std::string> symbols;
  std::uint64_t seed = 1;
};

}  // namespace mspm::data

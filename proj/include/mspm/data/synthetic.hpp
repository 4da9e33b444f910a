#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/data/transform.hpp"
#include "mspm/data/types.hpp"

namespace mspm::data {

inline void validate(const SyntheticMarketSpec& spec) {
  if (spec.num_assets == 0) throw DataError("synthetic: num_assets must be positive");
  if (spec.length < 2 * spec.window) throw DataError("synthetic: length must be at least twice the window");
  if (spec.regimes.empty()) throw DataError("synthetic: at least one regime plan is required");
  if (spec.regimes.size() != 1 && spec.regimes.size() != spec.num_assets) {
    throw DataError("synthetic: give one regime plan, or one per asset");
  }
  for (const auto& plan : spec.regimes) {
    if (plan.empty()) throw DataError("synthetic: empty regime plan");
    for (const auto& seg : plan) {
      if (seg.length == 0) throw DataError("synthetic: zero-length regime segment");
      if (seg.volatility < 0) throw DataError("synthetic: negative volatility");
    }
  }
  if (!spec.symbols.empty() && spec.symbols.size() != spec.num_assets) {
    throw DataError("synthetic: symbols must match num_assets");
  }
  if (spec.sentiment_missing_fraction < 0 || spec.sentiment_missing_fraction >= 1) {
    throw DataError("synthetic: sentiment_missing_fraction must lie in [0, 1)");
  }
  if (spec.initial_price <= 0 || spec.base_volume <= 0) throw DataError("synthetic: non-positive price or volume");
}

namespace detail {

/// Regime index for every day of one asset.
inline std::vector<const RegimeSegment*> lay_out_regimes(const std::vector<RegimeSegment>& plan, std::size_t length,
                                                         double random_mean, std::mt19937_64& rng) {
  std::vector<const RegimeSegment*> days;
  days.reserve(length);
  std::size_t k = 0;
  while (days.size() < length) {
    const RegimeSegment& seg = plan[k % plan.size()];
    std::size_t len = seg.length;
    if (random_mean > 0) {
      std::geometric_distribution<int> geo(1.0 / std::max(random_mean, 1.0));
      len = 1 + static_cast<std::size_t>(geo(rng));
    }
    for (std::size_t i = 0; i < len && days.size() < length; ++i) days.push_back(&seg);
    ++k;
  }
  return days;
}

}  // namespace detail

/// Segment-wise geometric random walks with sentiment that leads the next day's regime.
///
/// Daily log-returns are N(drift, volatility^2), so a segment of length L has expected
/// log-return drift * L. The sentiment published on day t is drawn around the bias of
/// the regime that governs day t + 1.
inline std::vector<AssetSeries> generate_synthetic(const SyntheticMarketSpec& spec) {
  validate(spec);
  std::vector<AssetSeries> out;
  out.reserve(spec.num_assets);

  std::vector<Date> calendar;
  calendar.reserve(spec.length);
  Date d = spec.start_date;
  while (d.iso_weekday() > 5) d = d.plus_days(1);
  for (std::size_t t = 0; t < spec.length; ++t) {
    calendar.push_back(d);
    d = d.next_weekday();
  }

  for (std::size_t a = 0; a < spec.num_assets; ++a) {
    std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), static_cast<std::uint64_t>(a),
                      static_cast<std::uint64_t>(0x5eed)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const auto& plan = spec.regimes.size() == 1 ? spec.regimes.front() : spec.regimes[a];
    auto regime = detail::lay_out_regimes(plan, spec.length, spec.random_segment_mean, rng);

    AssetSeries s;
    s.symbol = spec.symbols.empty() ? "SYN" + std::to_string(a) : spec.symbols[a];
    s.bars.reserve(spec.length);
    double prev_close = spec.initial_price;
    for (std::size_t t = 0; t < spec.length; ++t) {
      const RegimeSegment& seg = *regime[t];
      const double z_ret = normal(rng), z_open = normal(rng), z_high = normal(rng), z_low = normal(rng);
      const double z_vol = normal(rng), z_sent = normal(rng), z_buzz = normal(rng);
      const double u_missing = unit(rng);

      AssetBar bar;
      bar.date = calendar[t];
      if (t == 0) {
        bar.close = spec.initial_price;
        bar.open = spec.initial_price;
      } else {
        bar.close = prev_close * std::exp(seg.drift + seg.volatility * z_ret);
        bar.open = prev_close * std::exp(0.25 * seg.volatility * z_open);
      }
      bar.high = std::max(bar.open, bar.close) * std::exp(0.5 * seg.volatility * std::abs(z_high));
      bar.low = std::min(bar.open, bar.close) * std::exp(-0.5 * seg.volatility * std::abs(z_low));
      bar.volume = spec.base_volume * std::exp(spec.volume_noise * z_vol);
      prev_close = bar.close;
      s.bars.push_back(bar);

      const RegimeSegment& next = *regime[std::min(t + 1, spec.length - 1)];
      if (u_missing >= spec.sentiment_missing_fraction) {
        SentimentRecord rec;
        rec.date = bar.date;
        rec.sentiment = std::clamp(spec.sentiment_correlation * next.sentiment_bias + spec.sentiment_noise * z_sent,
                                   kSentimentMin, kSentimentMax);
        rec.news_buzz = std::clamp(1.0 + 1.5 * std::abs(rec.sentiment) + 0.5 * z_buzz, kNewsBuzzMin, kNewsBuzzMax);
        s.sentiments.push_back(rec);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Regime plan alternating `up` and `down` segments of equal length with
/// mirrored drift and sentiment bias.
inline std::vector<RegimeSegment> periodic_trend_plan(std::size_t half_period, double drift, double volatility,
                                                      double sentiment_bias) {
  return {RegimeSegment{half_period, drift, volatility, sentiment_bias},
          RegimeSegment{half_period, -drift, volatility, -sentiment_bias}};
}

}  // namespace mspm::data

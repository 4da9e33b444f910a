#pragma once

#include "mspm/data/synthetic.hpp"
#include "mspm/eam/signals.hpp"
#include "mspm/eam/trainer.hpp"
#include "mspm/sam/trainer.hpp"

namespace mspm::testing {

/// Alternating up/down regimes whose sentiment announces the next day's regime.
inline data::SyntheticMarketSpec periodic_market(std::size_t num_assets, std::size_t length, std::uint64_t seed,
                                                 std::size_t half_period = 10) {
  data::SyntheticMarketSpec spec;
  spec.num_assets = num_assets;
  spec.length = length;
  spec.window = 20;
  spec.regimes = {data::periodic_trend_plan(half_period, 0.01, 0.004, 3.0)};
  spec.random_segment_mean = static_cast<double>(half_period);
  spec.sentiment_noise = 0.5;
  spec.seed = seed;
  return spec;
}

/// Small Q-network settings that train in seconds on one core.
inline eam::EamHyperparams small_eam_hyperparams() {
  eam::EamHyperparams hp;
  hp.window = 20;
  hp.episode_length = 100;
  hp.episodes = 80;
  hp.gamma = 0.9;
  hp.epsilon = {1.0, 0.05, 3000};
  hp.target_sync = 250;
  hp.buffer_capacity = 20000;
  hp.batch_size = 32;
  hp.learning_rate = 5e-4;
  hp.train_every = 2;
  hp.warmup = 500;
  hp.network.window = 20;
  hp.network.stem_channels = 8;
  hp.network.residual_blocks = 1;
  hp.network.dense_width = 32;
  return hp;
}

/// Frames where asset `winner` gains `daily` per day and the rest stay flat.
inline std::vector<eam::SignalFrame> trending_frames(std::size_t num_assets, std::size_t length, std::size_t winner,
                                                     double daily = 0.01, std::size_t offset = 0) {
  std::vector<eam::SignalFrame> frames(num_assets);
  Date d(2020, 1, 1);
  std::vector<Date> dates;
  for (std::size_t t = 0; t < length; ++t, d = d.plus_days(1)) dates.push_back(d);
  for (std::size_t a = 0; a < num_assets; ++a) {
    auto& f = frames[a];
    f.symbol = "A" + std::to_string(a);
    f.dates = dates;
    for (std::size_t t = 0; t < length; ++t) {
      const double c = a == winner ? 100.0 * std::pow(1.0 + daily, static_cast<double>(t + offset)) : 100.0;
      f.open.push_back(c);
      f.high.push_back(c);
      f.low.push_back(c);
      f.close.push_back(c);
      f.volume.push_back(1000.0);
      f.signal.push_back(0);
    }
  }
  return frames;
}

/// Small policy settings for the trending market.
inline sam::SamHyperparams small_sam_hyperparams() {
  sam::SamHyperparams hp;
  hp.network.window = 10;
  hp.network.conv_channels = 8;
  hp.network.fusion_channels = 20;
  hp.rollout_length = 64;
  hp.minibatch = 32;
  hp.updates = 500;
  hp.actor_learning_rate = 3e-3;
  hp.critic_learning_rate = 3e-3;
  return hp;
}

}  // namespace mspm::testing

#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mspm/core/text.hpp"
#include "mspm/eam/dqn.hpp"
#include "mspm/eam/env.hpp"
#include "mspm/eam/qnetwork.hpp"
#include "mspm/nn/checkpoint.hpp"

namespace mspm::eam {

struct EamHyperparams {
  double gamma = 0.99;
  double commission = 0.0025;
  double reward_scale = 100.0;
  std::size_t window = 50;
  std::size_t episode_length = 250;
  std::size_t episodes = 200;
  int n_step = 2;
  EpsilonSchedule epsilon{1.0, 0.02, 20000};
  std::size_t target_sync = 1000;
  std::size_t buffer_capacity = 100000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  /// Environment steps between gradient updates.
  std::size_t train_every = 1;
  /// Transitions collected before the first update.
  std::size_t warmup = 1000;
  double grad_clip = 10.0;
  QNetworkConfig network;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("eam.gamma must lie in (0, 1]");
    if (commission < 0.0) throw ConfigError("eam.commission must be non-negative");
    if (epsilon.start < 0 || epsilon.start > 1 || epsilon.end < 0 || epsilon.end > 1) {
      throw ConfigError("eam epsilon values must lie in [0, 1]");
    }
    if (window == 0 || episode_length == 0 || batch_size == 0 || train_every == 0 || target_sync == 0) {
      throw ConfigError("eam window, episode_length, batch_size, train_every and target_sync must be positive");
    }
    if (network.window != window) throw ConfigError("eam.network.window must equal eam.window");
    if (learning_rate < 0.0) throw ConfigError("eam.learning_rate must be non-negative");
  }

  EnvConfig env() const { return {window, episode_length, commission, reward_scale}; }
};

struct EpisodeLog {
  std::size_t episode = 0;
  std::size_t steps = 0;
  double total_reward = 0.0;
  /// Mean loss over the episode's updates; NaN-free, 0 when no update ran.
  double loss = 0.0;
};

inline std::string training_log_csv(const std::vector<EpisodeLog>& log) {
  std::string out = "episode,steps,total_reward,loss\n";
  for (const auto& e : log) {
    out += std::to_string(e.episode) + "," + std::to_string(e.steps) + "," + text::format_double(e.total_reward) + "," +
           text::format_double(e.loss) + "\n";
  }
  return out;
}

struct EamTrainingResult {
  EamQNetwork model;
  std::vector<EpisodeLog> log;
  nn::AdamState optimizer;
  std::size_t env_steps = 0;
};

/// Trains a Q-network on one asset. With `initial`, training starts from an exact
/// copy of those parameters (optimizer state is not carried over).
inline EamTrainingResult train_eam(const MarketData& market, const EamHyperparams& hp, std::uint64_t seed,
                                   const nn::Checkpoint* initial = nullptr) {
  hp.validate();
  EamQNetwork net(hp.network);
  net.initialize(seed);
  if (initial) nn::restore(net, *initial);

  DqnLearner<EamQNetwork> learner(std::move(net), {hp.gamma, hp.learning_rate, 1.0, hp.grad_clip});
  TradingEnv env(market, hp.env());
  ReplayBuffer<EamObservation> replay(hp.buffer_capacity);
  NStepAccumulator<EamObservation> nstep(hp.n_step, hp.gamma);

  std::seed_seq seq{seed, std::uint64_t{0xea5eed}};
  std::mt19937_64 rng(seq);
  auto encode = [&](const EamObservation& o) { return make_state(market, o, hp.network); };
  auto sink = [&](Transition<EamObservation> t) { replay.push(std::move(t)); };

  EamTrainingResult result;
  std::size_t step = 0;
  for (std::size_t ep = 0; ep < hp.episodes; ++ep) {
    EamObservation obs = env.reset(rng);
    nstep.clear();
    EpisodeLog entry{ep, 0, 0.0, 0.0};
    std::size_t updates = 0;
    double loss_sum = 0.0;
    bool done = false;
    while (!done) {
      const double eps = hp.epsilon.at(step);
      const auto q = learner.online().forward(encode(obs));
      const auto action = static_cast<TradeAction>(act_epsilon_greedy(q.values(), eps, rng));
      StepResult r = env.step(action);
      done = r.done;
      // Episode ends are time limits, not terminal market states: keep bootstrapping.
      nstep.add(obs, static_cast<int>(action), r.reward, r.next, false, done, sink);
      obs = r.next;
      entry.total_reward += r.reward;
      ++entry.steps;
      ++step;

      if (replay.size() >= std::max(hp.batch_size, hp.warmup) && step % hp.train_every == 0) {
        double loss;
        try {
          loss = learner.train_batch(replay.sample(hp.batch_size, rng), encode);
        } catch (const NumericalError& e) {
          throw NumericalError(market.symbol + ": EAM training diverged at episode " + std::to_string(ep) + ", step " +
                               std::to_string(step) + ": " + e.what());
        }
        loss_sum += loss;
        ++updates;
      }
      if (step % hp.target_sync == 0) learner.sync_target();
    }
    entry.loss = updates ? loss_sum / static_cast<double>(updates) : 0.0;
    result.log.push_back(entry);
  }
  result.model = learner.online();
  result.optimizer = learner.optimizer();
  result.env_steps = step;
  return result;
}

}  // namespace mspm::eam

#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mspm/core/text.hpp"
#include "mspm/nn/checkpoint.hpp"
#include "mspm/sam/accounting.hpp"
#include "mspm/sam/policy.hpp"
#include "mspm/sam/ppo.hpp"

namespace mspm::sam {

struct SamHyperparams {
  double commission = 0.0025;
  double risk_discount = 0.001;
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  std::size_t epochs = 4;
  std::size_t rollout_length = 256;
  std::size_t minibatch = 64;
  std::size_t updates = 100;
  double sigma_train = 0.1;
  /// When positive, sigma decays linearly to this value over the updates.
  double sigma_final = 0.0;
  double actor_learning_rate = 3e-4;
  double critic_learning_rate = 1e-3;
  double grad_clip = 1.0;
  /// Multiplies r* before advantage estimation.
  double reward_scale = 100.0;
  /// Terminal reward for a non-positive log argument.
  double catastrophic_reward = -10.0;
  /// Evaluate on the validation frames every this many updates (0 = never) and keep the best.
  std::size_t validate_every = 0;
  PolicyNetworkConfig network;

  void validate() const {
    if (commission < 0 || risk_discount < 0) throw ConfigError("sam.commission and sam.risk_discount must be >= 0");
    if (!(clip > 0 && clip < 1)) throw ConfigError("sam.clip must lie in (0, 1)");
    if (sigma_train < 0) throw ConfigError("sam.sigma_train must be >= 0");
    if (updates > 0 && !(sigma_train > 0)) throw ConfigError("sam.sigma_train must be > 0 for training");
    if (rollout_length == 0 || minibatch == 0 || epochs == 0) {
      throw ConfigError("sam rollout_length, minibatch and epochs must be positive");
    }
    if (!(gamma > 0 && gamma <= 1) || lambda < 0 || lambda > 1) throw ConfigError("sam gamma/lambda out of range");
    if (network.window < 2) throw ConfigError("sam.network.window must be at least 2");
  }

  AccountingConfig accounting(double initial_value = 10000.0) const {
    return {commission, risk_discount, network.window, initial_value};
  }
};

struct UpdateLog {
  std::size_t update = 0;
  double mean_r_star = 0.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  double approx_kl = 0.0;
  /// Final value on the validation frames when evaluated, else NaN.
  double validation_value = std::numeric_limits<double>::quiet_NaN();
};

inline std::string update_log_csv(const std::vector<UpdateLog>& log) {
  std::string out = "update,mean_r_star,clip_fraction,value_loss,approx_kl,validation_value\n";
  for (const auto& u : log) {
    out += std::to_string(u.update) + "," + text::format_double(u.mean_r_star) + "," +
           text::format_double(u.clip_fraction) + "," + text::format_double(u.value_loss) + "," +
           text::format_double(u.approx_kl) + "," +
           (std::isnan(u.validation_value) ? std::string() : text::format_double(u.validation_value)) + "\n";
  }
  return out;
}

struct SamTrainingResult {
  PolicyPair model;
  std::vector<UpdateLog> log;
  std::size_t selected_update = 0;
};

/// Deterministic (sigma = 0) policy over frames; decisions start once a full window exists.
inline PortfolioLedger backtest(const nn::Graph& actor, const std::vector<SignalFrame>& frames,
                                const SamHyperparams& hp, double initial_value, const std::string& strategy = "MSPM") {
  require_aligned(frames);
  const std::size_t n = hp.network.window;
  std::mt19937_64 unused(0);
  AllocationPolicy policy = [&](std::size_t t, const Weights&) {
    const auto input = policy_input(stack_profound_state(frames, t, n), hp.network.price_scale);
    return policy_forward(actor, input, 0.0, unused).weights;
  };
  return run_portfolio(frames, hp.accounting(initial_value), all_cash(frames.size() + 1), n - 1, policy, strategy);
}

/// PPO on the training frames: each rollout starts all-cash at a random day and runs
/// `rollout_length` days (or to the end of the data).
inline SamTrainingResult train_sam(const std::vector<SignalFrame>& frames, const SamHyperparams& hp, std::uint64_t seed,
                                   const std::vector<SignalFrame>* validation = nullptr) {
  hp.validate();
  require_aligned(frames);
  const std::size_t n = hp.network.window;
  const std::size_t len = frames.front().size();
  const std::size_t rows = frames.size() + 1;
  if (len < n + 1) throw DataError("sam training frames shorter than the window plus one day");

  SamTrainingResult result;
  result.model = PolicyPair(hp.network, rows);
  result.model.initialize(seed);
  auto& actor = result.model.actor;
  auto& critic = result.model.critic;
  auto actor_opt = nn::AdamState::for_parameters(actor.parameters(), hp.actor_learning_rate);
  auto critic_opt = nn::AdamState::for_parameters(critic.parameters(), hp.critic_learning_rate);

  std::seed_seq seq{seed, std::uint64_t{0x5a3}};
  std::mt19937_64 rng(seq);

  // Inputs are reused across rollouts.
  std::vector<nn::Tensor> inputs(len);
  for (std::size_t t = n - 1; t < len; ++t) {
    inputs[t] = policy_input(stack_profound_state(frames, t, n), hp.network.price_scale);
  }
  std::vector<std::vector<double>> ys(len);
  for (std::size_t t = 1; t < len; ++t) ys[t] = frame_relative_prices(frames, t);

  double best_value = -std::numeric_limits<double>::infinity();
  std::optional<PolicyPair> best;
  const std::size_t last_decision = len - 2;

  for (std::size_t u = 0; u < hp.updates; ++u) {
    double sigma = hp.sigma_train;
    if (hp.sigma_final > 0.0 && hp.updates > 1) {
      sigma += (hp.sigma_final - hp.sigma_train) * static_cast<double>(u) / static_cast<double>(hp.updates - 1);
    }
    const std::size_t start = std::uniform_int_distribution<std::size_t>(n - 1, last_decision)(rng);
    PortfolioSimulator sim(rows, hp.accounting(), all_cash(rows));
    {
      std::vector<std::vector<double>> seed_ys(ys.begin() + 1, ys.begin() + static_cast<long>(start) + 1);
      sim.seed_history(std::move(seed_ys));
    }
    std::vector<PpoSample> batch;
    std::vector<double> rewards, values;
    std::vector<bool> terminal;
    double r_star_sum = 0.0;
    std::size_t t = start;
    for (std::size_t k = 0; k < hp.rollout_length && t <= last_decision; ++k, ++t) {
      const auto out = policy_forward(actor, inputs[t], sigma, rng);
      const auto r = sim.step(frames.front().dates[t + 1], out.weights, ys[t + 1]);
      batch.push_back({inputs[t], out.x, *out.log_prob, 0.0, 0.0});
      values.push_back(critic.forward(inputs[t])[0]);
      if (!r.ok) {
        rewards.push_back(hp.catastrophic_reward);
        terminal.push_back(true);
        ++t;
        break;
      }
      rewards.push_back(hp.reward_scale * r.r_star);
      terminal.push_back(false);
      r_star_sum += r.r_star;
    }
    values.push_back(critic.forward(inputs[std::min(t, len - 1)])[0]);
    const auto adv = advantage_estimates(rewards, values, terminal, hp.gamma, hp.lambda);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch[i].advantage = adv.normalized[i];
      batch[i].return_target = adv.returns[i];
    }
    PpoDiagnostics d;
    try {
      d = ppo_update(batch, actor, critic, actor_opt, critic_opt, {hp.clip, hp.epochs, hp.minibatch, sigma, hp.grad_clip},
                     rng);
    } catch (const NumericalError& e) {
      throw NumericalError("SAM training diverged at update " + std::to_string(u) + ": " + e.what());
    }
    UpdateLog entry{u, r_star_sum / static_cast<double>(batch.size()), d.clip_fraction, d.value_loss, d.approx_kl};
    if (validation && hp.validate_every > 0 && ((u + 1) % hp.validate_every == 0 || u + 1 == hp.updates)) {
      double v;
      try {
        v = backtest(actor, *validation, hp, 1.0).value.back();
      } catch (const NumericalError&) {
        v = 0.0;
      }
      entry.validation_value = v;
      if (v > best_value) {
        best_value = v;
        best = result.model;
        result.selected_update = u;
      }
    }
    result.log.push_back(entry);
  }
  if (best) {
    result.model = std::move(*best);
  } else {
    result.selected_update = hp.updates ? hp.updates - 1 : 0;
  }
  return result;
}

}  // namespace mspm::sam

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/nn/adam.hpp"
#include "mspm/nn/functional.hpp"
#include "mspm/nn/graph.hpp"

namespace mspm::sam {

struct AdvantageResult {
  std::vector<double> advantages;
  std::vector<double> normalized;
  /// advantages + values
  std::vector<double> returns;
};

/// Generalized advantage estimates.
///
/// values[t] = V(s_t) for t < T and values[T] = V(s_T) for bootstrapping;
/// terminal[t] marks steps after which nothing is bootstrapped.
inline AdvantageResult advantage_estimates(const std::vector<double>& rewards, const std::vector<double>& values,
                                           const std::vector<bool>& terminal, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || terminal.size() != n) throw ShapeError("advantage_estimates: length mismatch");
  AdvantageResult r;
  r.advantages.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_v = terminal[i] ? 0.0 : values[i + 1];
    const double delta = rewards[i] + gamma * next_v - values[i];
    running = delta + gamma * lambda * (terminal[i] ? 0.0 : running);
    r.advantages[i] = running;
  }
  r.returns.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.returns[i] = r.advantages[i] + values[i];
  r.normalized = r.advantages;
  if (n > 1) {
    const double mean = std::accumulate(r.advantages.begin(), r.advantages.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : r.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (auto& a : r.normalized) a = (a - mean) / (sd + 1e-8);
  }
  return r;
}

struct PpoSample {
  nn::Tensor input;
  std::vector<double> x;
  double log_prob = 0.0;
  double advantage = 0.0;
  double return_target = 0.0;
};

/// min(r A, clip(r, 1 - eps, 1 + eps) A)
inline double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

/// d clipped_surrogate / d ratio: A where the unclipped term is the minimum, else 0.
inline double clipped_surrogate_slope(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

struct SurrogateStats {
  double objective = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// Mean clipped surrogate over `idx`; accumulates the gradient of its negative into `actor`.
inline SurrogateStats actor_surrogate(nn::Graph& actor, const std::vector<PpoSample>& batch,
                                      const std::vector<std::size_t>& idx, double eps, double sigma) {
  SurrogateStats s;
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (auto i : idx) {
    const auto& b = batch[i];
    nn::ForwardCache cache;
    const nn::Tensor mu = actor.forward(b.input, cache);
    const double lp = nn::gaussian_log_prob(b.x, mu.values(), sigma);
    const double ratio = std::exp(lp - b.log_prob);
    s.objective += clipped_surrogate(ratio, b.advantage, eps) * inv;
    s.approx_kl += (b.log_prob - lp) * inv;
    if (std::abs(ratio - 1.0) > eps) s.clip_fraction += inv;
    const double slope = clipped_surrogate_slope(ratio, b.advantage, eps);
    if (slope == 0.0) continue;
    // d(-surrogate)/dmu = -slope * ratio * dlogp/dmu
    const auto dlp = nn::gaussian_log_prob_grad_mu(b.x, mu.values(), sigma);
    nn::Tensor g(mu.shape());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = -slope * ratio * dlp[k] * inv;
    actor.backward(g, cache);
  }
  return s;
}

/// Mean 0.5 (V - target)^2 over `idx`; accumulates its gradient into `critic`.
inline double critic_loss(nn::Graph& critic, const std::vector<PpoSample>& batch, const std::vector<std::size_t>& idx) {
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (auto i : idx) {
    nn::ForwardCache cache;
    const double v = critic.forward(batch[i].input, cache)[0];
    const double d = v - batch[i].return_target;
    loss += 0.5 * d * d * inv;
    critic.backward(nn::Tensor::vector({d * inv}), cache);
  }
  return loss;
}

struct PpoConfig {
  double clip = 0.2;
  std::size_t epochs = 4;
  std::size_t minibatch = 64;
  double sigma = 0.1;
  double grad_clip = 1.0;
};

struct PpoDiagnostics {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// Several epochs of shuffled minibatch updates on one collected batch.
inline PpoDiagnostics ppo_update(const std::vector<PpoSample>& batch, nn::Graph& actor, nn::Graph& critic,
                                 nn::AdamState& actor_opt, nn::AdamState& critic_opt, const PpoConfig& cfg,
                                 std::mt19937_64& rng) {
  if (batch.empty()) throw Error("ppo_update: empty batch");
  if (!(cfg.sigma > 0.0)) throw NumericalError("ppo_update: training requires sigma > 0");
  if (!(cfg.clip > 0.0 && cfg.clip < 1.0)) throw ConfigError("ppo clip must lie in (0, 1)");
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  PpoDiagnostics d;
  std::size_t count = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                   order.begin() + static_cast<long>(std::min(order.size(), start + cfg.minibatch)));
      actor.zero_grad();
      const auto s = actor_surrogate(actor, batch, idx, cfg.clip, cfg.sigma);
      critic.zero_grad();
      const double vl = critic_loss(critic, batch, idx);
      if (!std::isfinite(s.objective) || !std::isfinite(vl)) throw NumericalError("ppo: non-finite loss");
      if (cfg.grad_clip > 0.0) {
        nn::clip_grad_norm(actor.gradients(), cfg.grad_clip);
        nn::clip_grad_norm(critic.gradients(), cfg.grad_clip);
      }
      nn::adam_step(actor_opt, actor.parameters(), actor.gradients());
      nn::adam_step(critic_opt, critic.parameters(), critic.gradients());
      d.surrogate += s.objective;
      d.value_loss += vl;
      d.clip_fraction += s.clip_fraction;
      d.approx_kl += s.approx_kl;
      ++count;
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  d.surrogate *= inv;
  d.value_loss *= inv;
  d.clip_fraction *= inv;
  d.approx_kl *= inv;
  return d;
}

}  // namespace mspm::sam

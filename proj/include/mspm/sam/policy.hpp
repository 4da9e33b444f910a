#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mspm/nn/functional.hpp"
#include "mspm/nn/graph.hpp"
#include "mspm/sam/state.hpp"

namespace mspm::sam {

struct PolicyNetworkConfig {
  std::size_t window = 50;
  std::size_t conv_channels = 3;
  std::size_t conv_kernel = 3;
  std::size_t fusion_channels = 10;
  double price_scale = 10.0;
};

/// Per-asset temporal convolutions shared across rows, fused over the remaining
/// window, then a per-row linear score. Maps (f, m*, n) to (m*).
inline nn::Graph make_actor(const PolicyNetworkConfig& c, std::size_t rows) {
  if (c.window <= c.conv_kernel) throw ConfigError("sam window must exceed the conv kernel");
  nn::Graph g({kNumFeatures, rows, c.window});
  g.conv1d(c.conv_channels, c.conv_kernel).relu();
  g.conv1d(c.fusion_channels, c.window - c.conv_kernel + 1).relu();
  g.allocation_head();
  return g;
}

/// Same trunk layout with its own parameters; row scores are averaged into V(s).
inline nn::Graph make_critic(const PolicyNetworkConfig& c, std::size_t rows) {
  nn::Graph g = make_actor(c, rows);
  g.mean_pool();
  return g;
}

struct PolicyOutput {
  std::vector<double> mu;
  std::vector<double> x;
  std::vector<double> weights;
  /// Present only when sigma > 0.
  std::optional<double> log_prob;
};

/// x = mu + sigma * z, a = softmax(x). With sigma = 0 the result is deterministic.
inline PolicyOutput policy_forward(const nn::Graph& actor, const nn::Tensor& input, double sigma,
                                   std::mt19937_64& rng) {
  if (sigma < 0.0) throw NumericalError("policy sigma must be non-negative");
  PolicyOutput out;
  const nn::Tensor mu = actor.forward(input);
  out.mu.assign(mu.values().begin(), mu.values().end());
  out.x = out.mu;
  if (sigma > 0.0) {
    std::normal_distribution<double> z(0.0, 1.0);
    for (auto& v : out.x) v += sigma * z(rng);
    out.log_prob = nn::gaussian_log_prob(out.x, out.mu, sigma);
  }
  out.weights = nn::softmax(out.x);
  return out;
}

/// Actor and critic treated as one model for checkpoints.
struct PolicyPair {
  nn::Graph actor;
  nn::Graph critic;

  PolicyPair() = default;
  PolicyPair(const PolicyNetworkConfig& c, std::size_t rows) : actor(make_actor(c, rows)), critic(make_critic(c, rows)) {}

  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    actor.initialize(rng);
    critic.initialize(rng);
  }
  std::vector<nn::Tensor*> parameters() {
    auto p = actor.parameters();
    for (auto* t : critic.parameters()) p.push_back(t);
    return p;
  }
  std::string topology() const { return "sam{" + actor.topology() + "}{" + critic.topology() + "}"; }
};

}  // namespace mspm::sam

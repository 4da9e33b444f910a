#pragma once

#include <cmath>
#include <deque>
#include <random>
#include <unordered_set>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/nn/adam.hpp"
#include "mspm/nn/functional.hpp"
#include "mspm/nn/graph.hpp"

namespace mspm::eam {

template <class Obs>
struct Transition {
  Obs state;
  int action = 0;
  /// Discounted sum of the rewards over `steps` steps.
  double reward = 0.0;
  /// Observation `steps` steps after `state`.
  Obs next_state;
  /// True when no bootstrap should follow next_state.
  bool terminal = false;
  int steps = 1;
};

/// Fixed-capacity ring of transitions with uniform sampling without replacement.
template <class Obs>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition<Obs> t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition<Obs>& operator[](std::size_t i) const { return items_[i]; }

  /// `batch` distinct indices (Floyd's algorithm), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const {
    const std::size_t n = items_.size();
    if (batch > n) throw Error("replay buffer holds fewer transitions than the batch size");
    std::vector<std::size_t> out;
    out.reserve(batch);
    std::unordered_set<std::size_t> seen;
    for (std::size_t j = n - batch; j < n; ++j) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      const std::size_t pick = seen.contains(t) ? j : t;
      seen.insert(pick);
      out.push_back(pick);
    }
    return out;
  }

  std::vector<const Transition<Obs>*> sample(std::size_t batch, std::mt19937_64& rng) const {
    std::vector<const Transition<Obs>*> out;
    for (auto i : sample_indices(batch, rng)) out.push_back(&items_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition<Obs>> items_;
};

/// Turns a stream of one-step experiences into n-step transitions.
template <class Obs>
class NStepAccumulator {
 public:
  NStepAccumulator(int n, double gamma) : n_(n), gamma_(gamma) {
    if (n < 1) throw ConfigError("n-step horizon must be at least 1");
  }

  /// Records (state, action, reward) -> next. Emits completed transitions into `out`.
  /// `terminal` stops bootstrapping; `episode_end` flushes everything pending.
  template <class Sink>
  void add(const Obs& state, int action, double reward, const Obs& next, bool terminal, bool episode_end, Sink&& out) {
    pending_.push_back({state, action, reward});
    if (terminal || episode_end) {
      while (!pending_.empty()) emit(next, terminal, out);
      return;
    }
    if (static_cast<int>(pending_.size()) == n_) emit(next, false, out);
  }

  void clear() { pending_.clear(); }

 private:
  struct Step {
    Obs state;
    int action;
    double reward;
  };

  template <class Sink>
  void emit(const Obs& next, bool terminal, Sink& out) {
    Transition<Obs> t;
    t.state = pending_.front().state;
    t.action = pending_.front().action;
    double discount = 1.0;
    for (const auto& s : pending_) {
      t.reward += discount * s.reward;
      discount *= gamma_;
    }
    t.steps = static_cast<int>(pending_.size());
    t.next_state = next;
    t.terminal = terminal;
    pending_.pop_front();
    out(std::move(t));
  }

  int n_;
  double gamma_;
  std::deque<Step> pending_;
};

struct DqnConfig {
  double gamma = 0.99;
  double learning_rate = 1e-4;
  double huber_delta = 1.0;
  /// Joint gradient-norm cap per update; 0 disables clipping.
  double grad_clip = 10.0;
};

/// Index of the largest value, lowest index on ties.
inline int argmax(const nn::Tensor& q) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.size()); ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

/// Double-DQN learner over any model exposing forward/backward/parameters.
///
/// Targets use the online network to pick the next action and the target
/// network to value it: y = r + gamma^steps * Q_target(s', argmax_a Q_online(s', a)).
template <class Model>
class DqnLearner {
 public:
  DqnLearner(Model model, DqnConfig cfg)
      : online_(std::move(model)), target_(online_), cfg_(cfg) {
    optimizer_ = nn::AdamState::for_parameters(online_.parameters(), cfg.learning_rate);
  }

  template <class Obs, class Encode>
  std::vector<double> targets(const std::vector<const Transition<Obs>*>& batch, Encode&& encode) const {
    std::vector<double> y;
    y.reserve(batch.size());
    for (const auto* t : batch) {
      double v = t->reward;
      if (!t->terminal) {
        const auto input = encode(t->next_state);
        const int a = argmax(online_.forward(input));
        v += std::pow(cfg_.gamma, t->steps) * target_.forward(input)[a];
      }
      y.push_back(v);
    }
    return y;
  }

  /// One optimizer step on the mean Huber loss. Returns the loss.
  template <class Obs, class Encode>
  double train_batch(const std::vector<const Transition<Obs>*>& batch, Encode&& encode) {
    const auto y = targets(batch, encode);
    online_.zero_grad();
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      typename Model::Cache cache;
      const auto q = online_.forward(encode(batch[i]->state), cache);
      const double residual = q[batch[i]->action] - y[i];
      loss += nn::huber(residual, cfg_.huber_delta) * inv;
      nn::Tensor g(q.shape());
      g[batch[i]->action] = nn::huber_grad(residual, cfg_.huber_delta) * inv;
      online_.backward(g, cache);
    }
    if (!std::isfinite(loss)) throw NumericalError("dqn: non-finite loss");
    if (cfg_.grad_clip > 0.0) nn::clip_grad_norm(online_.gradients(), cfg_.grad_clip);
    nn::adam_step(optimizer_, online_.parameters(), online_.gradients());
    ++updates_;
    return loss;
  }

  void sync_target() { target_ = online_; }

  Model& online() { return online_; }
  const Model& online() const { return online_; }
  Model& target() { return target_; }
  const Model& target() const { return target_; }
  nn::AdamState& optimizer() { return optimizer_; }
  void set_learning_rate(double lr) { optimizer_.learning_rate = lr; }
  std::size_t updates() const { return updates_; }
  const DqnConfig& config() const { return cfg_; }

 private:
  Model online_;
  Model target_;
  DqnConfig cfg_;
  nn::AdamState optimizer_;
  std::size_t updates_ = 0;
};

}  // namespace mspm::eam

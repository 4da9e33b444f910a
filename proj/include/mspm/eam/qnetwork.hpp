#pragma once

#include <array>
#include <string>

#include "mspm/eam/env.hpp"
#include "mspm/nn/graph.hpp"

namespace mspm::eam {

inline constexpr std::size_t kPriceFeatures = 5;
inline constexpr std::size_t kSentimentFeatures = 2;

/// Network input for one observation.
struct EamState {
  /// (5, n): close, open, high, low, volume.
  nn::Tensor window;
  /// (2, n): sentiment, news_buzz.
  nn::Tensor sentiment_window;
  bool position_open = false;
  std::uint32_t bars_held = 0;
};

struct QNetworkConfig {
  std::size_t window = 50;
  std::size_t stem_channels = 32;
  std::size_t stem_kernel = 5;
  std::size_t residual_blocks = 2;
  std::size_t residual_kernel = 3;
  std::size_t dense_width = 128;
  /// Multiplies price moves relative to the last close.
  double price_scale = 10.0;
};

/// Builds the state ending at `obs.index`. Prices are taken relative to the last
/// close, volume relative to the window mean; sentiment and buzz are scaled to
/// roughly unit range.
inline EamState make_state(const MarketData& m, const EamObservation& obs, const QNetworkConfig& cfg) {
  const std::size_t n = cfg.window;
  if (obs.index + 1 < n || obs.index >= m.size()) throw DataError("eam state: not enough history before index");
  EamState s;
  s.window = nn::Tensor({kPriceFeatures, n});
  s.sentiment_window = nn::Tensor({kSentimentFeatures, n});
  const std::size_t first = obs.index + 1 - n;
  const double last = m.close[obs.index];
  double vol_mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) vol_mean += m.volume[first + j];
  vol_mean /= static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t t = first + j;
    s.window(0, j) = cfg.price_scale * (m.close[t] / last - 1.0);
    s.window(1, j) = cfg.price_scale * (m.open[t] / last - 1.0);
    s.window(2, j) = cfg.price_scale * (m.high[t] / last - 1.0);
    s.window(3, j) = cfg.price_scale * (m.low[t] / last - 1.0);
    s.window(4, j) = vol_mean > 0.0 ? m.volume[t] / vol_mean - 1.0 : 0.0;
    s.sentiment_window(0, j) = m.sentiment[t] / 5.0;
    s.sentiment_window(1, j) = m.news_buzz[t] / 10.0;
  }
  s.position_open = obs.position_open;
  s.bars_held = obs.bars_held;
  return s;
}

/// Conv residual body over the price window; its flattened features are joined
/// with the sentiment window and position features before the dueling head.
class EamQNetwork {
 public:
  struct Cache {
    nn::ForwardCache body;
    nn::ForwardCache head;
  };
  using Input = EamState;

  EamQNetwork() = default;
  explicit EamQNetwork(const QNetworkConfig& cfg) : cfg_(cfg), body_(nn::Shape{kPriceFeatures, cfg.window}) {
    if (cfg.stem_kernel % 2 == 0 || cfg.residual_kernel % 2 == 0) throw ConfigError("q-network kernels must be odd");
    body_.conv1d(cfg.stem_channels, cfg.stem_kernel, 1, cfg.stem_kernel / 2).relu();
    for (std::size_t b = 0; b < cfg.residual_blocks; ++b) {
      const std::size_t c = cfg.stem_channels, k = cfg.residual_kernel;
      body_.residual([&](nn::Graph& g) { g.conv1d(c, k, 1, k / 2).relu().conv1d(c, k, 1, k / 2); });
    }
    body_flat_ = nn::shape_size(body_.output_shape());
    head_ = nn::Graph({body_flat_ + kSentimentFeatures * cfg.window + 2});
    head_.dense(cfg.dense_width).relu().dueling(kNumActions);
  }

  const QNetworkConfig& config() const { return cfg_; }

  nn::Tensor forward(const EamState& s, Cache& cache) const {
    nn::Tensor feat = body_.forward(s.window, cache.body);
    nn::Tensor joined({head_.input_shape()[0]});
    std::copy(feat.values().begin(), feat.values().end(), joined.values().begin());
    std::size_t k = body_flat_;
    for (double v : s.sentiment_window.values()) joined[k++] = v;
    joined[k++] = s.position_open ? 1.0 : 0.0;
    joined[k++] = static_cast<double>(s.bars_held) / static_cast<double>(cfg_.window);
    return head_.forward(joined, cache.head);
  }

  nn::Tensor forward(const EamState& s) const {
    Cache c;
    return forward(s, c);
  }

  void backward(const nn::Tensor& grad_q, const Cache& cache) {
    nn::Tensor g = head_.backward(grad_q, cache.head);
    nn::Tensor g_body(body_.output_shape());
    std::copy(g.values().begin(), g.values().begin() + static_cast<long>(body_flat_), g_body.values().begin());
    body_.backward(g_body, cache.body);
  }

  std::vector<nn::Tensor*> parameters() {
    auto p = body_.parameters();
    for (auto* t : head_.parameters()) p.push_back(t);
    return p;
  }
  std::vector<nn::Tensor*> gradients() {
    auto p = body_.gradients();
    for (auto* t : head_.gradients()) p.push_back(t);
    return p;
  }
  void zero_grad() {
    body_.zero_grad();
    head_.zero_grad();
  }
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    body_.initialize(rng);
    head_.initialize(rng);
  }
  std::string topology() const { return "eam-q{" + body_.topology() + "}{" + head_.topology() + "}"; }

  nn::Graph& body() { return body_; }
  nn::Graph& head() { return head_; }

 private:
  QNetworkConfig cfg_;
  nn::Graph body_;
  nn::Graph head_;
  std::size_t body_flat_ = 0;
};

}  // namespace mspm::eam

#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mspm/core/digest.hpp"
#include "mspm/core/error.hpp"
#include "mspm/nn/layers.hpp"

namespace mspm::nn {

/// Activations recorded by Graph::forward, consumed by Graph::backward.
struct ForwardCache {
  std::vector<Activation> layers;
  bool filled = false;
};

/// Ordered stack of layers with a fixed input shape.
///
/// Built fluently: `Graph({5, 50}).conv1d(32, 5, 1, 2).relu().dense(3)`.
/// Copies are deep (parameters included).
class Graph {
 public:
  using Cache = ForwardCache;
  using Input = Tensor;

  Graph() = default;
  explicit Graph(Shape input) : input_(input), current_(std::move(input)) {}

  Graph(const Graph& o) : input_(o.input_), current_(o.current_) {
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Graph& operator=(const Graph& o) {
    if (this != &o) {
      Graph tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  Graph& add(std::unique_ptr<Layer> layer) {
    current_ = layer->output_shape(current_);
    layers_.push_back(std::move(layer));
    return *this;
  }

  Graph& conv1d(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1, std::size_t padding = 0) {
    if (current_.size() < 2) throw ShapeError("conv1d needs a (channels, ..., length) input, have " + shape_string(current_));
    return add(std::make_unique<Conv1d>(current_[0], out_channels, kernel, stride, padding));
  }
  Graph& dense(std::size_t out) { return add(std::make_unique<Dense>(shape_size(current_), out)); }
  Graph& relu() { return add(std::make_unique<Relu>()); }
  Graph& softmax() { return add(std::make_unique<Softmax>()); }
  Graph& mean_pool() { return add(std::make_unique<MeanPool>()); }
  Graph& dueling(std::size_t actions) { return add(std::make_unique<DuelingHead>(shape_size(current_), actions)); }
  Graph& allocation_head() {
    if (current_.size() != 3) throw ShapeError("allocation head needs (channels, rows, length), have " + shape_string(current_));
    return add(std::make_unique<AllocationHead>(current_[0], current_[2]));
  }
  /// Appends x + body(x); `build` receives a graph whose input is the current shape.
  Graph& residual(const std::function<void(Graph&)>& build);

  const Shape& input_shape() const { return input_; }
  const Shape& output_shape() const { return current_; }
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor forward(const Tensor& x, ForwardCache& cache) const {
    if (x.shape() != input_) {
      throw ShapeError("graph expects input " + shape_string(input_) + ", got " + shape_string(x.shape()));
    }
    cache.layers.assign(layers_.size(), Activation{});
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i]->forward(h, cache.layers[i]);
      if (!h.all_finite()) {
        throw NumericalError("non-finite intermediate after layer " + std::to_string(i) + " (" +
                             layers_[i]->signature() + ")");
      }
    }
    cache.filled = true;
    return h;
  }

  Tensor forward(const Tensor& x) const {
    ForwardCache c;
    return forward(x, c);
  }

  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  Tensor backward(const Tensor& grad_output, const ForwardCache& cache) {
    if (!cache.filled) throw Error("backward called without a forward cache");
    return backward(grad_output, cache.layers);
  }

  Tensor backward(const Tensor& grad_output, const std::vector<Activation>& acts) {
    if (acts.size() != layers_.size()) throw Error("backward called without a forward cache");
    if (grad_output.shape() != current_) {
      throw ShapeError("output gradient " + shape_string(grad_output.shape()) + " does not match " +
                       shape_string(current_));
    }
    Tensor g = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, acts[i]);
    return g;
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
      for (auto* p : l->parameters()) out.push_back(p);
    }
    return out;
  }
  std::vector<Tensor*> gradients() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
      for (auto* p : l->gradients()) out.push_back(p);
    }
    return out;
  }
  void zero_grad() {
    for (auto* g : gradients()) g->fill(0.0);
  }
  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->size();
    return n;
  }

  void initialize(std::mt19937_64& rng) {
    for (auto& l : layers_) l->initialize(rng);
  }
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    initialize(rng);
  }

  std::string topology() const {
    std::string out = "input" + shape_string(input_);
    for (const auto& l : layers_) out += "|" + l->signature();
    return out;
  }

 private:
  Shape input_;
  Shape current_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// y = x + body(x); body must preserve shape.
class ResidualBlock final : public Layer {
 public:
  explicit ResidualBlock(Graph body) : body_(std::move(body)) {
    if (body_.output_shape() != body_.input_shape()) {
      throw ShapeError("residual body maps " + shape_string(body_.input_shape()) + " to " +
                       shape_string(body_.output_shape()));
    }
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<ResidualBlock>(*this); }
  std::string signature() const override {
    std::string inner = body_.topology();
    return "residual[" + inner.substr(inner.find('|') == std::string::npos ? inner.size() : inner.find('|') + 1) + "]";
  }
  Shape output_shape(const Shape& in) const override {
    detail::require_same(in, body_.input_shape(), "residual");
    return in;
  }

  Tensor forward(const Tensor& x, Activation& cache) const override {
    ForwardCache inner;
    Tensor y = body_.forward(x, inner);
    y += x;
    cache.inner = std::move(inner.layers);
    return y;
  }

  Tensor backward(const Tensor& g, const Activation& cache) override {
    Tensor dx = body_.backward(g, cache.inner);
    dx += g;
    return dx;
  }

  std::vector<Tensor*> parameters() override { return body_.parameters(); }
  std::vector<Tensor*> gradients() override { return body_.gradients(); }
  void initialize(std::mt19937_64& rng) override { body_.initialize(rng); }

  Graph& body() { return body_; }

 private:
  Graph body_;
};

inline Graph& Graph::residual(const std::function<void(Graph&)>& build) {
  Graph body(current_);
  build(body);
  return add(std::make_unique<ResidualBlock>(std::move(body)));
}

/// Parameter digest used to match checkpoints to topologies.
inline std::uint64_t topology_digest(const std::string& topology) { return fnv1a(topology); }

/// Bitwise copy of all parameter values from `from` into `to`; topologies must match.
template <class Model>
void copy_parameters(Model& from, Model& to) {
  if (from.topology() != to.topology()) throw ShapeError("cannot copy parameters between different topologies");
  auto src = from.parameters();
  auto dst = to.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = *src[i];
}

}  // namespace mspm::nn

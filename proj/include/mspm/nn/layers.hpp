#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/nn/tensor.hpp"

namespace mspm::nn {

/// What one layer keeps from its forward pass for the backward pass.
struct Activation {
  Tensor input;
  Tensor output;
  std::vector<Activation> inner;
};

/// A differentiable layer. Parameter gradients are accumulated into the layer's
/// own gradient buffers by `backward`; callers zero them between steps.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::unique_ptr<Layer> clone() const = 0;
  /// Stable textual description of the layer's topology (no parameter values).
  virtual std::string signature() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& input, Activation& cache) const = 0;
  /// Returns the gradient with respect to the layer input.
  virtual Tensor backward(const Tensor& grad_output, const Activation& cache) = 0;

  virtual std::vector<Tensor*> parameters() { return {}; }
  virtual std::vector<Tensor*> gradients() { return {}; }
  virtual void initialize(std::mt19937_64&) {}
};

namespace detail {

inline void he_uniform(Tensor& w, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : w.values()) v = u(rng);
}

inline void require_same(const Shape& got, const Shape& want, const char* layer) {
  if (got != want) {
    throw ShapeError(std::string(layer) + ": expected input " + shape_string(want) + ", got " + shape_string(got));
  }
}

}  // namespace detail

/// 1-D cross-correlation over the last axis with zero padding.
///
/// Accepts (channels, length) or (channels, rows, length); in the latter case
/// every row is convolved with the same kernel.
class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
         std::size_t padding = 0)
      : in_(in_channels),
        out_(out_channels),
        kernel_(kernel),
        stride_(stride),
        pad_(padding),
        weight_({out_channels, in_channels, kernel}),
        bias_({out_channels}),
        grad_weight_({out_channels, in_channels, kernel}),
        grad_bias_({out_channels}) {
    if (!in_ || !out_ || !kernel_ || !stride_) throw ShapeError("conv1d: zero-sized configuration");
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1d>(*this); }

  std::string signature() const override {
    return "conv1d(in=" + std::to_string(in_) + ",out=" + std::to_string(out_) + ",k=" + std::to_string(kernel_) +
           ",s=" + std::to_string(stride_) + ",p=" + std::to_string(pad_) + ")";
  }

  Shape output_shape(const Shape& in) const override {
    if ((in.size() != 2 && in.size() != 3) || in[0] != in_) {
      throw ShapeError(signature() + ": cannot accept input " + shape_string(in));
    }
    const std::size_t len = in.back() + 2 * pad_;
    if (len < kernel_) throw ShapeError(signature() + ": input too short " + shape_string(in));
    const std::size_t out_len = (len - kernel_) / stride_ + 1;
    return in.size() == 2 ? Shape{out_, out_len} : Shape{out_, in[1], out_len};
  }

  Tensor forward(const Tensor& x, Activation& cache) const override {
    Tensor y(output_shape(x.shape()));
    const std::size_t rows = x.rank() == 3 ? x.dim(1) : 1;
    const std::size_t len = x.shape().back(), out_len = y.shape().back();
    const double* xv = x.data();
    const double* w = weight_.data();
    double* yv = y.data();
    for (std::size_t o = 0; o < out_; ++o) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < out_len; ++i) {
          double acc = bias_[o];
          for (std::size_t c = 0; c < in_; ++c) {
            const double* xr = xv + (c * rows + r) * len;
            const double* wk = w + (o * in_ + c) * kernel_;
            for (std::size_t k = 0; k < kernel_; ++k) {
              const long j = static_cast<long>(i * stride_ + k) - static_cast<long>(pad_);
              if (j >= 0 && j < static_cast<long>(len)) acc += wk[k] * xr[j];
            }
          }
          yv[(o * rows + r) * out_len + i] = acc;
        }
      }
    }
    cache.input = x;
    return y;
  }

  Tensor backward(const Tensor& g, const Activation& cache) override {
    const Tensor& x = cache.input;
    Tensor dx(x.shape());
    const std::size_t rows = x.rank() == 3 ? x.dim(1) : 1;
    const std::size_t len = x.shape().back(), out_len = g.shape().back();
    const double* xv = x.data();
    const double* gv = g.data();
    const double* w = weight_.data();
    double* dw = grad_weight_.data();
    double* dxv = dx.data();
    for (std::size_t o = 0; o < out_; ++o) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < out_len; ++i) {
          const double go = gv[(o * rows + r) * out_len + i];
          if (go == 0.0) continue;
          grad_bias_[o] += go;
          for (std::size_t c = 0; c < in_; ++c) {
            const std::size_t base = (c * rows + r) * len;
            const std::size_t wbase = (o * in_ + c) * kernel_;
            for (std::size_t k = 0; k < kernel_; ++k) {
              const long j = static_cast<long>(i * stride_ + k) - static_cast<long>(pad_);
              if (j < 0 || j >= static_cast<long>(len)) continue;
              dw[wbase + k] += go * xv[base + j];
              dxv[base + j] += go * w[wbase + k];
            }
          }
        }
      }
    }
    return dx;
  }

  std::vector<Tensor*> parameters() override { return {&weight_, &bias_}; }
  std::vector<Tensor*> gradients() override { return {&grad_weight_, &grad_bias_}; }

  void initialize(std::mt19937_64& rng) override {
    detail::he_uniform(weight_, in_ * kernel_, rng);
    bias_.fill(0.0);
  }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t in_, out_, kernel_, stride_, pad_;
  Tensor weight_, bias_, grad_weight_, grad_bias_;
};

/// Fully connected layer over the flattened input.
class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out)
      : in_(in), out_(out), weight_({out, in}), bias_({out}), grad_weight_({out, in}), grad_bias_({out}) {
    if (!in_ || !out_) throw ShapeError("dense: zero-sized configuration");
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  std::string signature() const override {
    return "dense(in=" + std::to_string(in_) + ",out=" + std::to_string(out_) + ")";
  }

  Shape output_shape(const Shape& in) const override {
    if (shape_size(in) != in_) throw ShapeError(signature() + ": cannot accept input " + shape_string(in));
    return {out_};
  }

  Tensor forward(const Tensor& x, Activation& cache) const override {
    output_shape(x.shape());
    Tensor y({out_});
    const double* w = weight_.data();
    const double* xv = x.data();
    for (std::size_t o = 0; o < out_; ++o) {
      double acc = bias_[o];
      const double* row = w + o * in_;
      for (std::size_t i = 0; i < in_; ++i) acc += row[i] * xv[i];
      y[o] = acc;
    }
    cache.input = x;
    return y;
  }

  Tensor backward(const Tensor& g, const Activation& cache) override {
    const Tensor& x = cache.input;
    Tensor dx(x.shape());
    const double* w = weight_.data();
    double* dw = grad_weight_.data();
    const double* xv = x.data();
    double* dxv = dx.data();
    for (std::size_t o = 0; o < out_; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      grad_bias_[o] += go;
      for (std::size_t i = 0; i < in_; ++i) {
        dw[o * in_ + i] += go * xv[i];
        dxv[i] += go * w[o * in_ + i];
      }
    }
    return dx;
  }

  std::vector<Tensor*> parameters() override { return {&weight_, &bias_}; }
  std::vector<Tensor*> gradients() override { return {&grad_weight_, &grad_bias_}; }

  void initialize(std::mt19937_64& rng) override {
    detail::he_uniform(weight_, in_, rng);
    bias_.fill(0.0);
  }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Tensor weight_, bias_, grad_weight_, grad_bias_;
};

class Relu final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
  std::string signature() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x, Activation& cache) const override {
    Tensor y = x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    cache.output = y;
    return y;
  }

  Tensor backward(const Tensor& g, const Activation& cache) override {
    Tensor dx = g;
    const auto& y = cache.output;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(y[i] > 0.0)) dx[i] = 0.0;
    }
    return dx;
  }
};

/// Max-shifted softmax over the flattened input.
class Softmax final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(*this); }
  std::string signature() const override { return "softmax"; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x, Activation& cache) const override {
    Tensor y = x;
    double m = -INFINITY;
    for (double v : x.values()) m = std::max(m, v);
    double z = 0.0;
    for (auto& v : y.values()) {
      v = std::exp(v - m);
      z += v;
    }
    for (auto& v : y.values()) v /= z;
    cache.output = y;
    return y;
  }

  Tensor backward(const Tensor& g, const Activation& cache) override {
    const auto& y = cache.output;
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (g[i] - dot);
    return dx;
  }
};

/// Q(s, a) = V(s) + A(s, a) - mean_a A(s, a), from two linear streams over the
/// flattened input.
class DuelingHead final : public Layer {
 public:
  DuelingHead(std::size_t in, std::size_t actions)
      : in_(in),
        actions_(actions),
        value_weight_({1, in}),
        value_bias_({1}),
        adv_weight_({actions, in}),
        adv_bias_({actions}),
        grad_value_weight_({1, in}),
        grad_value_bias_({1}),
        grad_adv_weight_({actions, in}),
        grad_adv_bias_({actions}) {
    if (!in_ || !actions_) throw ShapeError("dueling: zero-sized configuration");
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<DuelingHead>(*this); }
  std::string signature() const override {
    return "dueling(in=" + std::to_string(in_) + ",actions=" + std::to_string(actions_) + ")";
  }
  Shape output_shape(const Shape& in) const override {
    if (shape_size(in) != in_) throw ShapeError(signature() + ": cannot accept input " + shape_string(in));
    return {actions_};
  }

  /// State value and raw advantages for an input; exposed for the dueling identity checks.
  std::pair<double, std::vector<double>> streams(const Tensor& x) const {
    double v = value_bias_[0];
    for (std::size_t i = 0; i < in_; ++i) v += value_weight_[i] * x[i];
    std::vector<double> adv(actions_);
    for (std::size_t a = 0; a < actions_; ++a) {
      double acc = adv_bias_[a];
      for (std::size_t i = 0; i < in_; ++i) acc += adv_weight_[a * in_ + i] * x[i];
      adv[a] = acc;
    }
    return {v, adv};
  }

  static std::vector<double> combine(double value, const std::vector<double>& adv) {
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    std::vector<double> q(adv.size());
    for (std::size_t a = 0; a < adv.size(); ++a) q[a] = value + (adv[a] - mean);
    return q;
  }

  Tensor forward(const Tensor& x, Activation& cache) const override {
    output_shape(x.shape());
    auto [v, adv] = streams(x);
    cache.input = x;
    return Tensor::vector(combine(v, adv));
  }

  Tensor backward(const Tensor& g, const Activation& cache) override {
    const Tensor& x = cache.input;
    double g_sum = 0.0;
    for (std::size_t a = 0; a < actions_; ++a) g_sum += g[a];
    const double g_mean = g_sum / static_cast<double>(actions_);
    Tensor dx(x.shape());
    grad_value_bias_[0] += g_sum;
    for (std::size_t i = 0; i < in_; ++i) {
      grad_value_weight_[i] += g_sum * x[i];
      dx[i] += g_sum * value_weight_[i];
    }
    for (std::size_t a = 0; a < actions_; ++a) {
      const double ga = g[a] - g_mean;
      if (ga == 0.0) continue;
      grad_adv_bias_[a] += ga;
      for (std::size_t i = 0; i < in_; ++i) {
        grad_adv_weight_[a * in_ + i] += ga * x[i];
        dx[i] += ga * adv_weight_[a * in_ + i];
      }
    }
    return dx;
  }

  std::vector<Tensor*> parameters() override { return {&value_weight_, &value_bias_, &adv_weight_, &adv_bias_}; }
  std::vector<Tensor*> gradients() override {
    return {&grad_value_weight_, &grad_value_bias_, &grad_adv_weight_, &grad_adv_bias_};
  }
  void initialize(std::mt19937_64& rng) override {
    detail::he_uniform(value_weight_, in_, rng);
    detail::he_uniform(adv_weight_, in_, rng);
    value_bias_.fill(0.0);
    adv_bias_.fill(0.0);
  }

  Tensor& value_weight() { return value_weight_; }
  Tensor& value_bias() { return value_bias_; }
  Tensor& advantage_weight() { return adv_weight_; }
  Tensor& advantage_bias() { return adv_bias_; }

 private:
  std::size_t in_, actions_;
  Tensor value_weight_, value_bias_, adv_weight_, adv_bias_;
  Tensor grad_value_weight_, grad_value_bias_, grad_adv_weight_, grad_adv_bias_;
};

/// Per-row linear score: (channels, rows, length) -> (rows), weights shared by rows.
/// Produces the allocation logits mu, one per asset row.
class AllocationHead final : public Layer {
 public:
  AllocationHead(std::size_t channels, std::size_t length)
      : channels_(channels),
        length_(length),
        weight_({channels, length}),
        bias_({1}),
        grad_weight_({channels, length}),
        grad_bias_({1}) {}

  std::unique_ptr<Layer> clone() const override { return std::make_unique<AllocationHead>(*this); }
  std::string signature() const override {
    return "allocation(c=" + std::to_string(channels_) + ",len=" + std::to_string(length_) + ")";
  }
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != channels_ || in[2] != length_) {
      throw ShapeError(signature() + ": cannot accept input " + shape_string(in));
    }
    return {in[1]};
  }

  Tensor forward(const Tensor& x, Activation& cache) const override {
    Tensor y(output_shape(x.shape()));
    const std::size_t rows = x.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = bias_[0];
      for (std::size_t c = 0; c < channels_; ++c) {
        for (std::size_t l = 0; l < length_; ++l) acc += weight_(c, l) * x(c, r, l);
      }
      y[r] = acc;
    }
    cache.input = x;
    return y;
  }

  Tensor backward(const Tensor& g, const Activation& cache) override {
    const Tensor& x = cache.input;
    Tensor dx(x.shape());
    const std::size_t rows = x.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      const double gr = g[r];
      grad_bias_[0] += gr;
      for (std::size_t c = 0; c < channels_; ++c) {
        for (std::size_t l = 0; l < length_; ++l) {
          grad_weight_(c, l) += gr * x(c, r, l);
          dx(c, r, l) += gr * weight_(c, l);
        }
      }
    }
    return dx;
  }

  std::vector<Tensor*> parameters() override { return {&weight_, &bias_}; }
  std::vector<Tensor*> gradients() override { return {&grad_weight_, &grad_bias_}; }
  void initialize(std::mt19937_64& rng) override {
    detail::he_uniform(weight_, channels_ * length_, rng);
    bias_.fill(0.0);
  }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t channels_, length_;
  Tensor weight_, bias_, grad_weight_, grad_bias_;
};

/// Mean of all entries, as a 1-vector.
class MeanPool final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MeanPool>(*this); }
  std::string signature() const override { return "meanpool"; }
  Shape output_shape(const Shape& in) const override {
    if (shape_size(in) == 0) throw ShapeError("meanpool: empty input");
    return {1};
  }
  Tensor forward(const Tensor& x, Activation& cache) const override {
    double s = 0.0;
    for (double v : x.values()) s += v;
    cache.input = Tensor(x.shape());
    return Tensor::vector({s / static_cast<double>(x.size())});
  }
  Tensor backward(const Tensor& g, const Activation& cache) override {
    Tensor dx(cache.input.shape(), g[0] / static_cast<double>(cache.input.size()));
    return dx;
  }
};

}  // namespace mspm::nn

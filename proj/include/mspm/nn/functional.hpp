#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/nn/tensor.hpp"

namespace mspm::nn {

/// Sum over i of log N(x_i; mu_i, sigma).
inline double gaussian_log_prob(std::span<const double> x, std::span<const double> mu, double sigma) {
  if (x.size() != mu.size()) throw ShapeError("gaussian_log_prob: size mismatch");
  if (!(sigma > 0.0)) throw NumericalError("gaussian_log_prob: sigma must be positive");
  const double norm = -std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mu[i]) / sigma;
    lp += norm - 0.5 * z * z;
  }
  return lp;
}

/// d/dmu of gaussian_log_prob: (x - mu) / sigma^2.
inline std::vector<double> gaussian_log_prob_grad_mu(std::span<const double> x, std::span<const double> mu,
                                                     double sigma) {
  if (x.size() != mu.size()) throw ShapeError("gaussian_log_prob_grad_mu: size mismatch");
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = (x[i] - mu[i]) / (sigma * sigma);
  return g;
}

inline std::vector<double> softmax(std::span<const double> x) {
  double m = -INFINITY;
  for (double v : x) m = std::max(m, v);
  std::vector<double> y(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - m);
    z += y[i];
  }
  for (auto& v : y) v /= z;
  return y;
}

inline double huber(double residual, double delta = 1.0) {
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

inline double huber_grad(double residual, double delta = 1.0) {
  if (residual > delta) return delta;
  if (residual < -delta) return -delta;
  return residual;
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`. Returns the norm before scaling.
inline double clip_grad_norm(const std::vector<Tensor*>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto* g : grads) {
    for (double v : g->values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto* g : grads) {
      for (auto& v : g->values()) v *= s;
    }
  }
  return norm;
}

}  // namespace mspm::nn

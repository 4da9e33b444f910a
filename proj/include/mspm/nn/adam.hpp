#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/nn/tensor.hpp"

namespace mspm::nn {

struct AdamState {
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  /// Zeroed accumulators shaped like `params`.
  static AdamState for_parameters(const std::vector<Tensor*>& params, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    for (const auto* p : params) {
      s.first_moment.emplace_back(p->shape());
      s.second_moment.emplace_back(p->shape());
    }
    return s;
  }

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& s, const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads) {
  if (params.size() != grads.size() || params.size() != s.first_moment.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != s.first_moment[i].shape()) {
      throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
    if (!grads[i]->all_finite()) throw NumericalError("adam_step: non-finite gradient at parameter " + std::to_string(i));
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i]->data();
    const double* g = grads[i]->data();
    double* m = s.first_moment[i].data();
    double* v = s.second_moment[i].data();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g[j];
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g[j] * g[j];
      p[j] -= s.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + s.epsilon);
    }
  }
}

}  // namespace mspm::nn

#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/eam/signals.hpp"
#include "mspm/nn/tensor.hpp"

namespace mspm::sam {

using eam::SignalFrame;

/// Feature order along the first axis of the profound state.
enum Feature : std::size_t { kClose = 0, kOpen, kHigh, kLow, kVolume, kSignal, kNumFeatures };

/// Checks that every frame has the same dates as the first.
inline void require_aligned(const std::vector<SignalFrame>& frames) {
  if (frames.empty()) throw DataError("no asset frames given");
  for (const auto& f : frames) {
    if (f.dates != frames.front().dates) {
      throw DataError("frames '" + frames.front().symbol + "' and '" + f.symbol + "' are not date-aligned");
    }
  }
}

/// Rows [begin, end) of every frame.
inline std::vector<SignalFrame> slice_frames(const std::vector<SignalFrame>& frames, std::size_t begin, std::size_t end) {
  std::vector<SignalFrame> out;
  for (const auto& f : frames) {
    if (begin > end || end > f.size()) throw DataError("slice beyond frame '" + f.symbol + "'");
    auto cut = [&](const auto& v) { return std::decay_t<decltype(v)>(v.begin() + static_cast<long>(begin), v.begin() + static_cast<long>(end)); };
    out.push_back({f.symbol, cut(f.dates), cut(f.open), cut(f.high), cut(f.low), cut(f.close), cut(f.volume), cut(f.signal)});
  }
  return out;
}

/// (f, m + 1, n) tensor of the window ending at row `t`; row 0 is cash
/// (prices 1, volume 0, signal 0), rows 1..m follow `frames` order.
inline nn::Tensor stack_profound_state(const std::vector<SignalFrame>& frames, std::size_t t, std::size_t n) {
  require_aligned(frames);
  if (n == 0 || t + 1 < n) throw DataError("profound state: short history before row " + std::to_string(t));
  if (t >= frames.front().size()) throw DataError("profound state: row beyond frame end");
  const std::size_t rows = frames.size() + 1;
  nn::Tensor v({kNumFeatures, rows, n});
  const std::size_t first = t + 1 - n;
  for (std::size_t j = 0; j < n; ++j) {
    v(kClose, 0, j) = v(kOpen, 0, j) = v(kHigh, 0, j) = v(kLow, 0, j) = 1.0;
  }
  for (std::size_t a = 0; a < frames.size(); ++a) {
    const auto& f = frames[a];
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t s = first + j;
      v(kClose, a + 1, j) = f.close[s];
      v(kOpen, a + 1, j) = f.open[s];
      v(kHigh, a + 1, j) = f.high[s];
      v(kLow, a + 1, j) = f.low[s];
      v(kVolume, a + 1, j) = f.volume[s];
      v(kSignal, a + 1, j) = f.signal[s];
    }
  }
  v.require_finite("profound state");
  return v;
}

/// Network input derived from a profound state: prices relative to each row's
/// last close (times `price_scale`), volume relative to its window mean. The signal
/// channel carries the latest Buy/Close event forward (1 holding, -1 flat, 0 none yet).
inline nn::Tensor policy_input(const nn::Tensor& v, double price_scale = 10.0) {
  const std::size_t rows = v.dim(1), n = v.dim(2);
  nn::Tensor x(v.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double last = v(kClose, r, n - 1);
    double vol_mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) vol_mean += v(kVolume, r, j);
    vol_mean /= static_cast<double>(n);
    double state = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t f = kClose; f <= kLow; ++f) x(f, r, j) = price_scale * (v(f, r, j) / last - 1.0);
      x(kVolume, r, j) = vol_mean > 0.0 ? v(kVolume, r, j) / vol_mean - 1.0 : 0.0;
      if (v(kSignal, r, j) != 0.0) state = v(kSignal, r, j);
      x(kSignal, r, j) = state;
    }
  }
  return x;
}

}  // namespace mspm::sam

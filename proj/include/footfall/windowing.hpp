#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "footfall/error.hpp"

namespace footfall {

struct WindowingConfig {
  std::size_t window_size = 600;  // 3 s at 200 Hz
  std::size_t stride = 150;

  void validate() const {
    if (stride < 1 || stride > window_size)
      throw ValidationError("windowing: need 1 <= stride <= window_size");
  }
};

// One training example. `feats` is window_size x channels, row-major.
struct Window {
  std::vector<double> feats;
  std::vector<std::uint8_t> seq_labels;
  std::uint8_t glob_label = 0;
  std::size_t start_index = 0;
};

inline std::size_t window_count(std::size_t n, std::size_t w, std::size_t s) {
  if (w == 0 || s == 0 || n < w) return 0;
  return (n - w) / s + 1;
}

// Slices `features` (n x channels, row-major) into windows starting at
// 0, S, 2S, ... Trailing rows that do not fill a window are dropped.
inline std::vector<Window> slice_windows(std::span<const double> features, std::size_t channels,
                                         std::span<const std::uint8_t> targets, const WindowingConfig& cfg) {
  cfg.validate();
  if (channels == 0 || features.size() % channels != 0) throw ShapeError("slice_windows: ragged feature matrix");
  const std::size_t n = features.size() / channels;
  if (n != targets.size())
    throw ShapeError("slice_windows: " + std::to_string(n) + " feature rows vs " + std::to_string(targets.size()) +
                     " targets");
  const std::size_t count = window_count(n, cfg.window_size, cfg.stride);
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = k * cfg.stride;
    Window w;
    w.start_index = start;
    const auto f = features.subspan(start * channels, cfg.window_size * channels);
    w.feats.assign(f.begin(), f.end());
    const auto t = targets.subspan(start, cfg.window_size);
    w.seq_labels.assign(t.begin(), t.end());
    w.glob_label = *std::max_element(w.seq_labels.begin(), w.seq_labels.end()) ? 1 : 0;
    out.push_back(std::move(w));
  }
  return out;
}

inline std::vector<double> sampler_weights(std::span<const Window> windows, double factor) {
  if (!(factor > 0.0)) throw ValidationError("sampler_weights: factor must be positive");
  std::vector<double> w;
  w.reserve(windows.size());
  for (const auto& win : windows) w.push_back(win.glob_label ? factor : 1.0);
  return w;
}

// Draws `epoch_len` indices with replacement, P(i) proportional to weights[i].
template <class Rng>
std::vector<std::size_t> weighted_sample_epoch(std::span<const double> weights, std::size_t epoch_len, Rng& rng) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("weighted_sample_epoch: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("weighted_sample_epoch: all weights are zero");
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  std::vector<std::size_t> out(epoch_len);
  for (auto& i : out) i = dist(rng);
  return out;
}

}  // namespace footfall

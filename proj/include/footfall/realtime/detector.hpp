#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "footfall/error.hpp"
#include "footfall/features.hpp"
#include "footfall/nn/convlstm.hpp"
#include "footfall/training.hpp"

namespace footfall {

struct DetectorConfig {
  double sample_threshold = 0.85;
  double window_threshold = 0.45;
  std::size_t inference_stride = 25;
  std::size_t hit_window = 5;     // M
  std::size_t required_hits = 3;  // N
  double min_interval_ms = 300.0;

  static constexpr std::size_t kMaxHitWindow = 64;

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

inline constexpr std::array<std::string_view, 6> kTunableNames = {
    "sample_threshold", "window_threshold", "inference_stride", "hit_window", "required_hits", "min_interval_ms"};

// Empty when valid, otherwise the reason. `window_size` bounds the stride.
inline std::string config_error(const DetectorConfig& c, std::size_t window_size) {
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(c.sample_threshold)) return "sample_threshold must be in [0, 1]";
  if (!prob(c.window_threshold)) return "window_threshold must be in [0, 1]";
  if (c.inference_stride < 1 || c.inference_stride > window_size)
    return "inference_stride must be in [1, " + std::to_string(window_size) + "]";
  if (c.hit_window < 1 || c.hit_window > DetectorConfig::kMaxHitWindow)
    return "hit_window must be in [1, " + std::to_string(DetectorConfig::kMaxHitWindow) + "]";
  if (c.required_hits < 1 || c.required_hits > c.hit_window) return "required_hits must be in [1, hit_window]";
  if (!(c.min_interval_ms >= 0.0) || !std::isfinite(c.min_interval_ms)) return "min_interval_ms must be >= 0";
  return {};
}

inline nlohmann::json config_to_json(const DetectorConfig& c) {
  return {{"sample_threshold", c.sample_threshold}, {"window_threshold", c.window_threshold},
          {"inference_stride", c.inference_stride}, {"hit_window", c.hit_window},
          {"required_hits", c.required_hits},       {"min_interval_ms", c.min_interval_ms}};
}

struct SetResult {
  bool ok = false;
  std::string reason;
  DetectorConfig config;  // effective config after the call
};

// Applies one named update to a copy of `c`; `c` is unchanged on rejection.
inline SetResult apply_param(const DetectorConfig& c, std::string_view name, double value, std::size_t window_size) {
  SetResult r{false, {}, c};
  if (!std::isfinite(value)) {
    r.reason = std::string(name) + ": value must be finite";
    return r;
  }
  DetectorConfig n = c;
  auto count = [&](std::size_t& field) {
    if (value < 0 || value != std::floor(value)) return false;
    field = static_cast<std::size_t>(value);
    return true;
  };
  bool integral = true;
  if (name == "sample_threshold") n.sample_threshold = value;
  else if (name == "window_threshold") n.window_threshold = value;
  else if (name == "inference_stride") integral = count(n.inference_stride);
  else if (name == "hit_window") integral = count(n.hit_window);
  else if (name == "required_hits") integral = count(n.required_hits);
  else if (name == "min_interval_ms") n.min_interval_ms = value;
  else {
    r.reason = "unknown parameter '" + std::string(name) + "'";
    return r;
  }
  if (!integral) {
    r.reason = std::string(name) + " must be a non-negative integer";
    return r;
  }
  if (auto err = config_error(n, window_size); !err.empty()) {
    r.reason = err;
    return r;
  }
  r.ok = true;
  r.config = n;
  return r;
}

struct DetectionEvent {
  std::int64_t timestamp_ms = 0;
  double confidence = 0.0;         // p_t
  double window_confidence = 0.0;  // p_win
  std::size_t sample_index = 0;    // position in the accepted sample stream

  friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

// Dual threshold, N-of-M hit filter and refractory period.
class Gate {
 public:
  // Returns whether this decision fires at data time t_ms.
  bool step(double p_t, double p_win, std::int64_t t_ms, const DetectorConfig& cfg) {
    const bool hit = p_t > cfg.sample_threshold && p_win > cfg.window_threshold;
    history_[head_] = hit;
    head_ = (head_ + 1) % history_.size();
    stored_ = std::min(stored_ + 1, history_.size());
    const std::size_t hits = recent_hits(cfg.hit_window);
    const bool refractory_ok =
        !last_detection_ms_ || static_cast<double>(t_ms - *last_detection_ms_) >= cfg.min_interval_ms;
    if (hits >= cfg.required_hits && refractory_ok) {
      stored_ = 0;
      last_detection_ms_ = t_ms;
      ++total_;
      return true;
    }
    return false;
  }

  // Hits among the last min(m, stored) decisions.
  std::size_t recent_hits(std::size_t m) const {
    const std::size_t n = std::min(m, stored_);
    std::size_t hits = 0;
    for (std::size_t k = 1; k <= n; ++k) hits += history_[(head_ + history_.size() - k) % history_.size()];
    return hits;
  }

  std::size_t history_length() const { return stored_; }
  std::optional<std::int64_t> last_detection_ms() const { return last_detection_ms_; }
  std::size_t total() const { return total_; }

  void reset() {
    stored_ = 0;
    head_ = 0;
    last_detection_ms_.reset();
    total_ = 0;
  }

 private:
  std::array<bool, DetectorConfig::kMaxHitWindow> history_{};
  std::size_t head_ = 0;
  std::size_t stored_ = 0;
  std::optional<std::int64_t> last_detection_ms_;
  std::size_t total_ = 0;
};

// One inference, as seen by observers.
struct InferenceRecord {
  std::size_t newest_index = 0;   // sample index of the newest row in the window
  std::int64_t newest_ms = 0;     // its timestamp
  std::size_t stride = 0;         // newest-region length used for p_t
  double p_t = 0.0;
  double p_win = 0.0;
  std::size_t argmax_index = 0;   // sample index of p_t
  std::int64_t argmax_ms = 0;
  bool fired = false;
  std::span<const double> seq_probs;  // window_size entries, oldest first
};

struct DetectorStats {
  std::size_t samples = 0;
  std::size_t rejected_samples = 0;
  std::size_t inferences = 0;
  std::size_t detections = 0;
};

// Streaming detector: keeps the newest window_size feature rows, runs the
// model every inference_stride samples once the window is full, and gates
// the result. All timing uses sample timestamps.
//
// push_sample() is called from one streaming thread. set_param() and
// config() may be called from any thread; updates are picked up at the next
// inference.
class StreamingDetector {
 public:
  using Observer = std::function<void(const InferenceRecord&)>;

  StreamingDetector(const nn::ConvLstm& model, const Metadata& meta, const DetectorConfig& cfg = {})
      : model_(model), meta_(meta), cfg_(cfg) {
    validate_metadata(meta_);
    if (auto err = config_error(cfg_, meta_.window_size); !err.empty()) throw ValidationError("detector: " + err);
    const std::size_t w = meta_.window_size;
    raw_.assign(w * kFeatureCount, 0.0);
    times_.assign(w, 0);
    window_.assign(w * kFeatureCount, 0.0);
    probs_.assign(w, 0.0);
    ws_.ensure(w, model_.hidden(), nn::ConvLstm::kConvChannels, nn::ConvLstm::kInputChannels);
  }

  // Returns the detection fired by this sample, if any.
  std::optional<DetectionEvent> push_sample(double x, double y, double z, std::int64_t t_ms) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      ++stats_.rejected_samples;
      return std::nullopt;
    }
    const std::size_t w = meta_.window_size;
    const std::size_t index = stats_.samples;
    // dt to the previous accepted sample. The very first row takes the
    // nominal period until the second sample arrives, then copies dt_1 (the
    // same rule featurize() applies offline).
    const double dt = index == 0 ? kNominalPeriodMs : static_cast<double>(t_ms - last_ms_);
    const std::size_t slot = head_;
    feature_row(x, y, z, dt, std::span<double>(raw_).subspan(slot * kFeatureCount, kFeatureCount));
    times_[slot] = t_ms;
    if (index == 1) raw_[first_slot_ * kFeatureCount + 4] = dt;
    if (index == 0) first_slot_ = slot;
    head_ = (head_ + 1) % w;
    filled_ = std::min(filled_ + 1, w);
    last_ms_ = t_ms;
    ++stats_.samples;
    ++since_inference_;

    const DetectorConfig cfg = config();
    if (filled_ < w || since_inference_ < cfg.inference_stride) return std::nullopt;
    since_inference_ = 0;
    return infer(cfg, index, t_ms);
  }

  SetResult set_param(std::string_view name, double value) {
    std::lock_guard lock(cfg_mutex_);
    SetResult r = apply_param(cfg_, name, value, meta_.window_size);
    if (r.ok) {
      cfg_ = r.config;
      ++cfg_version_;
    }
    return r;
  }

  DetectorConfig config() const {
    std::lock_guard lock(cfg_mutex_);
    return cfg_;
  }

  std::uint64_t config_version() const {
    std::lock_guard lock(cfg_mutex_);
    return cfg_version_;
  }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  const Metadata& metadata() const { return meta_; }
  const DetectorStats& stats() const { return stats_; }
  const Gate& gate() const { return gate_; }
  const std::optional<InferenceRecord>& last_inference() const { return last_; }
  std::size_t buffered() const { return filled_; }

 private:
  std::optional<DetectionEvent> infer(const DetectorConfig& cfg, std::size_t newest_index, std::int64_t newest_ms) {
    const std::size_t w = meta_.window_size;
    // Oldest row sits at head_ once the ring is full.
    for (std::size_t k = 0; k < w; ++k) {
      const std::size_t slot = (head_ + k) % w;
      normalize_row(std::span<const double>(raw_).subspan(slot * kFeatureCount, kFeatureCount),
                    std::span<double>(window_).subspan(k * kFeatureCount, kFeatureCount), meta_.scaler);
    }
    model_.forward(window_, w, ws_, false);
    for (std::size_t k = 0; k < w; ++k) probs_[k] = nn::sigmoid(ws_.seq_logits[k]);
    const double p_win = nn::sigmoid(ws_.glob_logit);
    const std::size_t region = std::min(cfg.inference_stride, w);
    std::size_t best = w - region;
    for (std::size_t k = best + 1; k < w; ++k)
      if (probs_[k] > probs_[best]) best = k;
    const double p_t = probs_[best];
    const std::int64_t best_ms = times_[(head_ + best) % w];
    const std::size_t best_index = newest_index - (w - 1 - best);

    const bool fired = gate_.step(p_t, p_win, best_ms, cfg);
    ++stats_.inferences;
    last_ = InferenceRecord{newest_index, newest_ms, region, p_t, p_win, best_index, best_ms, fired, probs_};
    if (observer_) observer_(*last_);
    if (!fired) return std::nullopt;
    ++stats_.detections;
    return DetectionEvent{best_ms, p_t, p_win, best_index};
  }

  const nn::ConvLstm& model_;
  Metadata meta_;
  mutable std::mutex cfg_mutex_;
  DetectorConfig cfg_;
  std::uint64_t cfg_version_ = 0;

  std::vector<double> raw_;  // ring of unscaled feature rows
  std::vector<std::int64_t> times_;
  std::size_t head_ = 0;  // next slot to write
  std::size_t filled_ = 0;
  std::size_t first_slot_ = 0;
  std::int64_t last_ms_ = 0;
  std::size_t since_inference_ = 0;

  std::vector<double> window_;  // normalized, chronological
  std::vector<double> probs_;
  nn::ConvLstmWorkspace ws_;
  Gate gate_;
  DetectorStats stats_;
  std::optional<InferenceRecord> last_;
  Observer observer_;
};

}  // namespace footfall

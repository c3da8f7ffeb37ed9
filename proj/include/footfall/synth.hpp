#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "footfall/data_io.hpp"
#include "footfall/error.hpp"

namespace footfall {

struct SynthConfig {
  double duration_s = 60.0;
  double sample_rate_hz = 200.0;
  double mean_step_interval_ms = 550.0;
  double interval_jitter_ms = 60.0;
  double spike_amplitude_g = 3.0;
  double spike_decay_ms = 40.0;
  double noise_std_g = 0.15;
  double gravity_bias_g = 1.0;  // on z
  std::uint64_t seed = 1;
  std::int64_t start_ms = 0;

  void validate() const {
    if (!(duration_s > 0) || !(sample_rate_hz > 0) || !(mean_step_interval_ms > 0) || !(interval_jitter_ms >= 0) ||
        !(spike_amplitude_g > 0) || !(spike_decay_ms > 0) || !(noise_std_g >= 0))
      throw ValidationError("SynthConfig: parameters must be positive");
    if (!(interval_jitter_ms < mean_step_interval_ms))
      throw ValidationError("SynthConfig: jitter must be smaller than the mean interval");
    if (duration_s * 1000.0 < 2.0 * mean_step_interval_ms)
      throw ValidationError("SynthConfig: duration must cover at least two mean step intervals");
  }
};

inline constexpr double kSpikeAxisWeights[3] = {1.0, 0.6, 0.8};

// Synthetic walking session: footfalls follow a renewal process with
// truncated-Gaussian (+-3 sigma) interval jitter; each footfall starts an
// exponentially decaying spike on all three axes. Footfall onsets sit on the
// sample grid and the annotation carries the onset timestamp.
inline RawSession generate_session(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  const double period_ms = 1000.0 / cfg.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate_hz));

  auto draw_interval_samples = [&] {
    double z = unit(rng);
    while (std::abs(z) > 3.0) z = unit(rng);
    const double ms = cfg.mean_step_interval_ms + cfg.interval_jitter_ms * z;
    return std::max<std::int64_t>(1, std::llround(ms / period_ms));
  };

  std::vector<std::size_t> onsets;
  for (auto idx = static_cast<std::int64_t>(draw_interval_samples()); idx < static_cast<std::int64_t>(n);
       idx += draw_interval_samples())
    onsets.push_back(static_cast<std::size_t>(idx));

  RawSession s;
  s.source_name = "synthetic_seed_" + std::to_string(cfg.seed);
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = s.samples[i];
    r.timestamp_ms = cfg.start_ms + std::llround(static_cast<double>(i) * period_ms);
    r.z = cfg.gravity_bias_g;
  }

  // A spike contributes until it has decayed below 1e-6 of its amplitude.
  const auto spike_len = static_cast<std::size_t>(std::ceil(cfg.spike_decay_ms * std::log(1e6) / period_ms));
  for (std::size_t onset : onsets) {
    for (std::size_t k = 0; k < spike_len && onset + k < n; ++k) {
      const double v = cfg.spike_amplitude_g * std::exp(-(static_cast<double>(k) * period_ms) / cfg.spike_decay_ms);
      s.samples[onset + k].x += kSpikeAxisWeights[0] * v;
      s.samples[onset + k].y += kSpikeAxisWeights[1] * v;
      s.samples[onset + k].z += kSpikeAxisWeights[2] * v;
    }
    s.events.push_back({s.samples[onset].timestamp_ms});
  }

  if (cfg.noise_std_g > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_std_g);
    for (auto& r : s.samples) {
      r.x += noise(rng);
      r.y += noise(rng);
      r.z += noise(rng);
    }
  }
  return s;
}

}  // namespace footfall

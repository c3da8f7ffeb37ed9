#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "footfall/nn/convlstm.hpp"
#include "footfall/pipeline.hpp"
#include "footfall/realtime/detector.hpp"
#include "footfall/synth.hpp"

namespace footfall::testing {

// All weights zero; every position gets sigmoid(seq_logit), the window
// sigmoid(glob_logit).
inline nn::ConvLstm constant_model(std::size_t hidden, double seq_logit, double glob_logit) {
  nn::ConvLstm m(hidden);
  for (std::size_t i = 0; i < m.params().size(); ++i) std::fill(m.params()[i].data.begin(), m.params()[i].data.end(), 0.0);
  m.params().at("seq_head_b").data[0] = seq_logit;
  m.params().at("glob_head_b").data[0] = glob_logit;
  return m;
}

inline nn::ConvLstm random_model(std::size_t hidden, std::uint64_t seed) {
  nn::ConvLstm m(hidden);
  nn::init_params(m.params(), seed);
  return m;
}

inline RawSession synth_session(double seconds, std::uint64_t seed, double noise = 0.15) {
  SynthConfig c;
  c.duration_s = seconds;
  c.seed = seed;
  c.noise_std_g = noise;
  return generate_session(c);
}

inline Metadata metadata_for(const RawSession& s, std::size_t window, std::size_t stride = 150) {
  return Metadata{window, std::min(stride, window), 0.5, fit_scaler(featurize(assign_labels(s)))};
}

// Straightforward N-of-M gate: keeps every decision since the last fire and
// looks at the newest M of them.
struct ReferenceGate {
  std::vector<bool> since_fire;
  std::optional<std::int64_t> last_fire;

  bool step(double p_t, double p_win, std::int64_t t, const DetectorConfig& c) {
    since_fire.push_back(p_t > c.sample_threshold && p_win > c.window_threshold);
    std::size_t hits = 0;
    const std::size_t n = since_fire.size();
    for (std::size_t k = 0; k < std::min(c.hit_window, n); ++k) hits += since_fire[n - 1 - k];
    const bool quiet = !last_fire || double(t - *last_fire) >= c.min_interval_ms;
    if (hits >= c.required_hits && quiet) {
      since_fire.clear();
      last_fire = t;
      return true;
    }
    return false;
  }
};

}  // namespace footfall::testing

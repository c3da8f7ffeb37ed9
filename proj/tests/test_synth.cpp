#include <gtest/gtest.h>

#include <cmath>

#include "footfall/data_io.hpp"
#include "footfall/synth.hpp"

using namespace footfall;

TEST(Synth, DeterministicPerSeed) {
  SynthConfig cfg;
  cfg.duration_s = 20;
  const auto a = generate_session(cfg);
  const auto b = generate_session(cfg);
  EXPECT_TRUE(same_content(a, b));
  cfg.seed += 1;
  EXPECT_FALSE(same_content(a, generate_session(cfg)));
}

TEST(Synth, SampleGridAndCadence) {
  SynthConfig cfg;
  cfg.duration_s = 120;
  cfg.start_ms = 1000;
  const auto s = generate_session(cfg);
  ASSERT_EQ(s.samples.size(), 24000u);
  for (std::size_t i = 0; i < s.samples.size(); ++i) ASSERT_EQ(s.samples[i].timestamp_ms, 1000 + 5 * (std::int64_t)i);
  ASSERT_GT(s.events.size(), 150u);
  double sum = 0;
  for (std::size_t i = 1; i < s.events.size(); ++i) {
    const auto d = s.events[i].timestamp_ms - s.events[i - 1].timestamp_ms;
    ASSERT_GE(d, 550 - 3 * 60 - 5);
    ASSERT_LE(d, 550 + 3 * 60 + 5);
    sum += static_cast<double>(d);
  }
  EXPECT_NEAR(sum / (s.events.size() - 1), 550.0, 15.0);
  // Every annotation sits on a sample.
  const auto labels = assign_labels(s);
  EXPECT_EQ(event_indices(labels).size(), s.events.size());
}

TEST(Synth, SpikeShapeWithoutNoise) {
  SynthConfig cfg;
  cfg.duration_s = 5;
  cfg.noise_std_g = 0.0;
  const auto s = generate_session(cfg);
  ASSERT_FALSE(s.events.empty());
  const auto i = nearest_sample_index(s.samples, s.events[0].timestamp_ms);
  EXPECT_NEAR(s.samples[i].x, 3.0, 1e-12);
  EXPECT_NEAR(s.samples[i].y, 1.8, 1e-12);
  EXPECT_NEAR(s.samples[i].z, 1.0 + 2.4, 1e-12);
  EXPECT_NEAR(s.samples[i + 8].x, 3.0 * std::exp(-1.0), 1e-12);
  EXPECT_EQ(s.samples[i - 1].x, 0.0);
  EXPECT_EQ(s.samples[i - 1].z, 1.0);
}

TEST(Synth, RejectsBadConfig) {
  SynthConfig cfg;
  cfg.sample_rate_hz = 0;
  EXPECT_THROW(generate_session(cfg), ValidationError);
}

TEST(Synth, SixtySecondsEventCount) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig cfg;
    cfg.duration_s = 60;
    cfg.seed = seed;
    const auto s = generate_session(cfg);
    EXPECT_GE(s.events.size(), 90u) << seed;
    EXPECT_LE(s.events.size(), 130u) << seed;
    EXPECT_NEAR(static_cast<double>(s.samples.size()), 12000.0, 1.0);
  }
}

TEST(Synth, NoiselessAnnotationsAreMagnitudePeaks) {
  SynthConfig cfg;
  cfg.duration_s = 30;
  cfg.noise_std_g = 0.0;
  cfg.seed = 3;
  const auto s = generate_session(cfg);
  auto mag = [&](std::size_t i) {
    const auto& p = s.samples[i];
    return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  };
  ASSERT_GT(s.events.size(), 40u);
  for (const auto& e : s.events) {
    const auto i = nearest_sample_index(s.samples, e.timestamp_ms);
    ASSERT_GT(i, 0u);
    ASSERT_LT(i + 1, s.samples.size());
    EXPECT_GT(mag(i), mag(i - 1)) << e.timestamp_ms;
    EXPECT_GE(mag(i), mag(i + 1)) << e.timestamp_ms;
  }
}

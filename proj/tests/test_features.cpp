#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "footfall/features.hpp"
#include "test_util.hpp"

using namespace footfall;

TEST(Featurize, SingleRow) {
  const std::vector<RawSample> s{{100, 3, 4, 0}};
  const auto f = featurize(s);
  ASSERT_EQ(f.rows(), 1u);
  EXPECT_DOUBLE_EQ(f.at(0, 3), 5.0);
  EXPECT_DOUBLE_EQ(f.at(0, 4), 5.0);
}

TEST(Featurize, DtColumnAndMagnitude) {
  const std::vector<RawSample> s{{0, 1, 1, 1}, {5, 0, 0, 0}, {10, 0, 0, 0}};
  const auto f = featurize(s);
  EXPECT_NEAR(f.at(0, 3), 1.7320508, 1e-7);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(f.at(i, 4), 5.0);
  const std::vector<RawSample> g{{0}, {7}, {9}};
  const auto h = featurize(g);
  EXPECT_DOUBLE_EQ(h.at(0, 4), 7.0);
  EXPECT_DOUBLE_EQ(h.at(1, 4), 7.0);
  EXPECT_DOUBLE_EQ(h.at(2, 4), 2.0);
  EXPECT_EQ(h.timestamps, (std::vector<std::int64_t>{0, 7, 9}));
}

TEST(Scaler, SmallExamples) {
  FeatureSeries f;
  f.values = {1, 7, 0, 0, 0, 3, 7, 0, 0, 0};
  f.timestamps = {0, 5};
  const auto s = fit_scaler(f);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.scale[0], 1.0);
  EXPECT_DOUBLE_EQ(s.mean[1], 7.0);
  EXPECT_DOUBLE_EQ(s.scale[1], 1.0);
  std::array<double, 5> out{};
  std::array<double, 5> in{3, 7, 0, 0, 0};
  normalize_row(in, out, s);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  FeatureSeries one;
  one.values.assign(5, 1.0);
  one.timestamps = {0};
  EXPECT_THROW(fit_scaler(one), ValidationError);
}

TEST(Scaler, StandardizesRandomData) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::normal_distribution<double> n(trial - 10.0, 0.1 + trial);
    FeatureSeries f;
    const std::size_t rows = 2 + trial * 97;
    for (std::size_t i = 0; i < rows * 5; ++i) f.values.push_back(n(rng));
    f.timestamps.assign(rows, 0);
    const auto s = fit_scaler(f);
    const auto t = scaler_transform(f, s);
    for (std::size_t c = 0; c < 5; ++c) {
      double m = 0, v = 0;
      for (std::size_t i = 0; i < rows; ++i) m += t.at(i, c);
      m /= rows;
      for (std::size_t i = 0; i < rows; ++i) v += (t.at(i, c) - m) * (t.at(i, c) - m);
      EXPECT_LT(std::abs(m), 1e-9);
      EXPECT_LT(std::abs(std::sqrt(v / rows) - 1.0), 1e-9);
    }
    const auto back = scaler_inverse_transform(t, s);
    for (std::size_t i = 0; i < f.values.size(); ++i) EXPECT_NEAR(back.values[i], f.values[i], 1e-9);
  }
}

TEST(Scaler, JsonRoundTripIsExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  ScalerStats s;
  for (std::size_t c = 0; c < 5; ++c) {
    s.mean[c] = u(rng) / 7.0;
    s.scale[c] = std::abs(u(rng)) / 3.0 + 1e-3;
  }
  const auto back = load_scaler(save_scaler(s));
  EXPECT_EQ(back.mean, s.mean);
  EXPECT_EQ(back.scale, s.scale);
  EXPECT_THROW(load_scaler(R"({"mean":[0,0,0,0,0]})"), FormatError);
  EXPECT_THROW(load_scaler(R"({"mean":[0,0,0,0,0],"scale":[1,1,0,1,1]})"), ValidationError);
  EXPECT_THROW(load_scaler(R"({"mean":[0,0,0,0],"scale":[1,1,1,1,1]})"), FormatError);
  EXPECT_THROW(load_scaler("not json"), FormatError);
}

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "footfall/data_io.hpp"
#include "footfall/error.hpp"

namespace footfall {

// Channel order: x, y, z, magnitude, dt.
inline constexpr std::size_t kFeatureCount = 5;
inline constexpr double kNominalPeriodMs = 5.0;

struct FeatureSeries {
  std::vector<double> values;  // rows() x kFeatureCount, row-major
  std::vector<std::int64_t> timestamps;

  std::size_t rows() const { return timestamps.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * kFeatureCount, kFeatureCount};
  }
  std::span<double> row(std::size_t i) { return {values.data() + i * kFeatureCount, kFeatureCount}; }
  double at(std::size_t i, std::size_t c) const { return values[i * kFeatureCount + c]; }
};

inline void feature_row(double x, double y, double z, double dt_ms, std::span<double> out) {
  out[0] = x;
  out[1] = y;
  out[2] = z;
  out[3] = std::sqrt(x * x + y * y + z * z);
  out[4] = dt_ms;
}

// The first row's dt copies the second row's (nominal 5 ms for a single row).
inline FeatureSeries featurize(std::span<const RawSample> samples) {
  FeatureSeries out;
  const std::size_t n = samples.size();
  out.values.resize(n * kFeatureCount);
  out.timestamps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dt = kNominalPeriodMs;
    if (i > 0)
      dt = static_cast<double>(samples[i].timestamp_ms - samples[i - 1].timestamp_ms);
    else if (n > 1)
      dt = static_cast<double>(samples[1].timestamp_ms - samples[0].timestamp_ms);
    feature_row(samples[i].x, samples[i].y, samples[i].z, dt, out.row(i));
    out.timestamps[i] = samples[i].timestamp_ms;
  }
  return out;
}

inline FeatureSeries featurize(const LabeledSeries& series) { return featurize(std::span(series.samples)); }

struct ScalerStats {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> scale{1.0, 1.0, 1.0, 1.0, 1.0};

  friend bool operator==(const ScalerStats&, const ScalerStats&) = default;
};

inline constexpr double kMinScale = 1e-12;

// Per-channel mean and population standard deviation. Channels with
// std < 1e-12 get scale 1.
inline ScalerStats fit_scaler(const FeatureSeries& f) {
  const std::size_t n = f.rows();
  if (n < 2) throw ValidationError("fit_scaler: need at least 2 rows, got " + std::to_string(n));
  ScalerStats s;
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += f.at(i, c);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = f.at(i, c) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.mean[c] = mean;
    s.scale[c] = sd < kMinScale ? 1.0 : sd;
  }
  return s;
}

// Shared by the offline transform and the streaming detector so both paths
// produce identical bits.
inline void normalize_row(std::span<const double> in, std::span<double> out, const ScalerStats& s) {
  for (std::size_t c = 0; c < kFeatureCount; ++c) out[c] = (in[c] - s.mean[c]) / s.scale[c];
}

inline FeatureSeries scaler_transform(const FeatureSeries& f, const ScalerStats& s) {
  FeatureSeries out = f;
  for (std::size_t i = 0; i < f.rows(); ++i) normalize_row(f.row(i), out.row(i), s);
  return out;
}

inline FeatureSeries scaler_inverse_transform(const FeatureSeries& f, const ScalerStats& s) {
  FeatureSeries out = f;
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t c = 0; c < kFeatureCount; ++c) out.values[i * kFeatureCount + c] = f.at(i, c) * s.scale[c] + s.mean[c];
  return out;
}

inline void validate_scaler(const ScalerStats& s) {
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    if (!std::isfinite(s.mean[c])) throw ValidationError("scaler mean must be finite");
    if (!(s.scale[c] > 0.0) || !std::isfinite(s.scale[c])) throw ValidationError("scaler scale must be positive");
  }
}

inline nlohmann::json scaler_to_json(const ScalerStats& s) {
  return nlohmann::json{{"mean", s.mean}, {"scale", s.scale}};
}

inline ScalerStats scaler_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("scaler: expected a JSON object");
  ScalerStats s;
  for (const char* key : {"mean", "scale"}) {
    if (!j.contains(key)) throw FormatError(std::string("scaler: missing '") + key + "' key");
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != kFeatureCount)
      throw FormatError(std::string("scaler: '") + key + "' must be an array of 5 numbers");
    auto& dst = std::string_view(key) == "mean" ? s.mean : s.scale;
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      if (!arr[c].is_number()) throw FormatError(std::string("scaler: non-numeric entry in '") + key + "'");
      dst[c] = arr[c].get<double>();
    }
  }
  validate_scaler(s);
  return s;
}

inline std::string save_scaler(const ScalerStats& s) { return scaler_to_json(s).dump(); }

inline ScalerStats load_scaler(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("scaler: ") + e.what());
  }
  return scaler_from_json(j);
}

}  // namespace footfall

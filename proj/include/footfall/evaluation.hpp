#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "footfall/error.hpp"
#include "footfall/windowing.hpp"

namespace footfall {

using EventList = std::vector<std::size_t>;

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t fp = 0;

  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ToleranceRow {
  std::size_t tolerance = 0;
  MatchCounts counts;
  Prf metrics;
};

using ToleranceReport = std::vector<ToleranceRow>;

// Averages per-window probabilities over every window covering each index.
// `window_probs(start, out)` must fill `out` (length W) with the probabilities
// for the window beginning at row `start`. Indices covered by no window get 0.
template <class WindowProbFn>
std::vector<double> batch_probs(std::size_t n, std::size_t window, std::size_t stride, WindowProbFn&& window_probs) {
  if (window == 0 || stride == 0) throw ValidationError("batch_probs: window and stride must be positive");
  if (n < window)
    throw ValidationError("batch_probs: series of " + std::to_string(n) + " rows is shorter than window " +
                          std::to_string(window));
  std::vector<double> sum(n, 0.0);
  std::vector<std::uint32_t> cover(n, 0);
  std::vector<double> probs(window);
  const std::size_t count = window_count(n, window, stride);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = k * stride;
    window_probs(start, std::span<double>(probs));
    for (std::size_t i = 0; i < window; ++i) {
      sum[start + i] += probs[i];
      ++cover[start + i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) sum[i] = cover[i] ? sum[i] / cover[i] : 0.0;
  return sum;
}

// Each maximal run of probs > tau yields one event at the run's argmax
// (first index on ties).
inline EventList extract_events(std::span<const double> probs, double tau) {
  EventList out;
  std::size_t i = 0;
  while (i < probs.size()) {
    if (!(probs[i] > tau)) {
      ++i;
      continue;
    }
    std::size_t best = i;
    while (i < probs.size() && probs[i] > tau) {
      if (probs[i] > probs[best]) best = i;
      ++i;
    }
    out.push_back(best);
  }
  return out;
}

// Greedy one-to-one matching: truths in order, each takes the nearest still
// unmatched prediction within `tol` samples (earlier prediction on ties).
inline MatchCounts tolerance_match(std::span<const std::size_t> pred, std::span<const std::size_t> truth,
                                   std::size_t tol) {
  MatchCounts m;
  std::vector<bool> used(pred.size(), false);
  for (std::size_t t : truth) {
    const std::size_t lo_val = t >= tol ? t - tol : 0;
    auto it = std::lower_bound(pred.begin(), pred.end(), lo_val);
    std::size_t best = pred.size();
    std::size_t best_d = 0;
    for (; it != pred.end() && *it <= t + tol; ++it) {
      const auto j = static_cast<std::size_t>(it - pred.begin());
      if (used[j]) continue;
      const std::size_t d = *it > t ? *it - t : t - *it;
      if (best == pred.size() || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    if (best == pred.size()) {
      ++m.fn;
    } else {
      used[best] = true;
      ++m.tp;
    }
  }
  m.fp = static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
  return m;
}

inline Prf prf(std::size_t tp, std::size_t fn, std::size_t fp) {
  Prf r;
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

inline Prf prf(const MatchCounts& m) { return prf(m.tp, m.fn, m.fp); }

inline constexpr std::size_t kSweepMaxTolerance = 50;
inline constexpr std::size_t kSweepStep = 5;

inline ToleranceReport tolerance_sweep(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  ToleranceReport report;
  for (std::size_t tol = 0; tol <= kSweepMaxTolerance; tol += kSweepStep) {
    ToleranceRow row;
    row.tolerance = tol;
    row.counts = tolerance_match(pred, truth, tol);
    row.metrics = prf(row.counts);
    report.push_back(row);
  }
  return report;
}

// {"0":{"tp":..,"fn":..,"fp":..,"prec":..,"rec":..,"f1":..}, "5":{...}, ...}
inline nlohmann::json report_to_json(const ToleranceReport& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& row : report) {
    j[std::to_string(row.tolerance)] = {{"tp", row.counts.tp},        {"fn", row.counts.fn},
                                        {"fp", row.counts.fp},        {"prec", row.metrics.precision},
                                        {"rec", row.metrics.recall},  {"f1", row.metrics.f1}};
  }
  return j;
}

inline constexpr double kSamplePeriodMs = 5.0;

inline double tolerance_to_ms(std::size_t samples, double period_ms = kSamplePeriodMs) {
  return static_cast<double>(samples) * period_ms;
}

}  // namespace footfall

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <thread>
#include <vector>

#include "footfall/data_io.hpp"
#include "footfall/evaluation.hpp"
#include "footfall/realtime/detector.hpp"
#include "footfall/realtime/telemetry.hpp"

namespace footfall {

// Running TP/FN/FP for a replay, in sample-index space. The provisional
// counts only settle truths and predictions that no future input can change;
// finish() returns exactly tolerance_match over everything seen.
class LiveScorer {
 public:
  explicit LiveScorer(std::size_t tolerance) : tol_(tolerance) {}

  void add_truth(std::size_t index) { insert_sorted(truth_, index); }
  void add_prediction(std::size_t index) { insert_sorted(pred_, index); }

  // Counts given that every prediction at index <= `current` has been seen.
  // A truth t is settled once current > t + tol. An unmatched prediction p is
  // a settled false positive once every truth that could reach it is settled,
  // i.e. current > p + 2 tol.
  MatchCounts provisional(std::size_t current) const {
    std::vector<std::size_t> settled;
    for (std::size_t t : truth_)
      if (current > t + tol_) settled.push_back(t);
    std::vector<bool> used(pred_.size(), false);
    MatchCounts out;
    out.tp = mark_used(settled, used);
    out.fn = settled.size() - out.tp;
    for (std::size_t j = 0; j < pred_.size(); ++j)
      if (!used[j] && current > pred_[j] + 2 * tol_) ++out.fp;
    return out;
  }

  MatchCounts finish() const { return tolerance_match(pred_, truth_, tol_); }

  std::size_t tolerance() const { return tol_; }
  const std::vector<std::size_t>& predictions() const { return pred_; }
  const std::vector<std::size_t>& truths() const { return truth_; }

 private:
  static void insert_sorted(std::vector<std::size_t>& v, std::size_t x) {
    v.insert(std::upper_bound(v.begin(), v.end(), x), x);
  }

  // Same greedy walk as tolerance_match, recording which predictions it used.
  std::size_t mark_used(const std::vector<std::size_t>& truth, std::vector<bool>& used) const {
    std::size_t matched = 0;
    for (std::size_t t : truth) {
      const std::size_t lo = t >= tol_ ? t - tol_ : 0;
      std::size_t best = pred_.size(), best_d = 0;
      for (auto it = std::lower_bound(pred_.begin(), pred_.end(), lo); it != pred_.end() && *it <= t + tol_; ++it) {
        const auto j = static_cast<std::size_t>(it - pred_.begin());
        if (used[j]) continue;
        const std::size_t d = *it > t ? *it - t : t - *it;
        if (best == pred_.size() || d < best_d) {
          best = j;
          best_d = d;
        }
      }
      if (best != pred_.size()) {
        used[best] = true;
        ++matched;
      }
    }
    return matched;
  }

  std::size_t tol_;
  std::vector<std::size_t> pred_;
  std::vector<std::size_t> truth_;
};

inline constexpr std::size_t kDefaultScoreTolerance = 15;  // samples (75 ms at 200 Hz)

struct ReplayOptions {
  double rate = 0.0;  // 1 = real time, 2 = twice as fast, 0 = as fast as possible
  std::size_t score_tolerance = kDefaultScoreTolerance;
  const std::atomic<bool>* cancel = nullptr;
};

struct ReplayCallbacks {
  std::function<void(const TelemetryFrame&)> on_frame;
  std::function<void(const DetectionEvent&, std::size_t total)> on_event;
};

struct ReplayResult {
  std::vector<DetectionEvent> events;
  std::size_t frames = 0;
  std::size_t samples_fed = 0;
  bool cancelled = false;
  MatchCounts counts;
  Prf metrics;
  DetectorStats stats;
};

// Feeds `session` through `detector` in timestamp order. Pacing only affects
// wall-clock delivery; everything the detector computes uses data time.
// Each frame's truth is whether an annotation lands in the frame's newest
// stride region.
inline ReplayResult replay(const RawSession& session, StreamingDetector& detector, const ReplayOptions& opt = {},
                           const ReplayCallbacks& cb = {}) {
  if (opt.rate < 0.0) throw ValidationError("replay: rate must be >= 0");
  if (detector.stats().samples != 0) throw StateError("replay: detector has already seen samples");
  const LabeledSeries labels = assign_labels(session);
  const std::vector<std::size_t> truth_idx = event_indices(labels);
  // Prefix count of truth indices so each frame's region is one subtraction.
  std::vector<std::size_t> truth_prefix(labels.target.size() + 1, 0);
  for (std::size_t i = 0; i < labels.target.size(); ++i) truth_prefix[i + 1] = truth_prefix[i] + labels.target[i];

  ReplayResult result;
  LiveScorer scorer(opt.score_tolerance);
  for (std::size_t t : truth_idx) scorer.add_truth(t);

  // Detector indices count accepted samples only, so map them back.
  std::vector<std::size_t> session_index;
  session_index.reserve(labels.samples.size());

  detector.set_observer([&](const InferenceRecord& r) {
    TelemetryFrame f{r.newest_ms, r.p_t, r.p_win, r.fired, std::nullopt};
    const std::size_t newest = session_index[r.newest_index];
    const std::size_t oldest = session_index[r.newest_index + 1 - r.stride];
    f.truth = truth_prefix[newest + 1] - truth_prefix[oldest] > 0;
    ++result.frames;
    if (cb.on_frame) cb.on_frame(f);
  });

  using clock = std::chrono::steady_clock;
  const auto host_start = clock::now();
  const std::int64_t data_start = labels.samples.empty() ? 0 : labels.samples.front().timestamp_ms;
  for (std::size_t i = 0; i < labels.samples.size(); ++i) {
    if (opt.cancel && opt.cancel->load()) {
      result.cancelled = true;
      break;
    }
    const RawSample& s = labels.samples[i];
    if (opt.rate > 0.0) {
      const double offset_ms = static_cast<double>(s.timestamp_ms - data_start) / opt.rate;
      std::this_thread::sleep_until(host_start + std::chrono::duration<double, std::milli>(offset_ms));
    }
    const std::size_t before = detector.stats().samples;
    session_index.push_back(i);
    const auto ev = detector.push_sample(s.x, s.y, s.z, s.timestamp_ms);
    if (detector.stats().samples == before) session_index.pop_back();  // rejected
    ++result.samples_fed;
    if (ev) {
      DetectionEvent mapped = *ev;
      mapped.sample_index = session_index[ev->sample_index];
      result.events.push_back(mapped);
      scorer.add_prediction(mapped.sample_index);
      if (cb.on_event) cb.on_event(mapped, detector.gate().total());
    }
  }
  detector.set_observer(nullptr);

  result.counts = scorer.finish();
  result.metrics = prf(result.counts);
  result.stats = detector.stats();
  return result;
}

// Pushes a replay's frames and events into a hub.
inline ReplayCallbacks hub_callbacks(TelemetryHub& hub) {
  return {[&hub](const TelemetryFrame& f) { hub.publish_frame(f); },
          [&hub](const DetectionEvent& e, std::size_t total) { hub.publish_event(e, total); }};
}

}  // namespace footfall

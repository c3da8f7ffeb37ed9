#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "footfall/data_io.hpp"
#include "footfall/evaluation.hpp"
#include "footfall/features.hpp"
#include "footfall/nn/cnn.hpp"
#include "footfall/nn/convlstm.hpp"
#include "footfall/nn/logistic.hpp"
#include "footfall/training.hpp"
#include "footfall/windowing.hpp"

namespace footfall {

// Seed offsets so weight init, the split and the sampler draw from unrelated
// streams even though they derive from one user-facing seed.
inline std::uint64_t init_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 1; }
inline std::uint64_t split_seed(std::uint64_t seed) { return seed * 0xBF58476D1CE4E5B9ULL + 2; }

inline FeatureSeries concat_features(std::span<const FeatureSeries> parts) {
  FeatureSeries all;
  for (const auto& p : parts) {
    all.values.insert(all.values.end(), p.values.begin(), p.values.end());
    all.timestamps.insert(all.timestamps.end(), p.timestamps.begin(), p.timestamps.end());
  }
  return all;
}

struct LabeledFeatures {
  FeatureSeries features;  // raw, unscaled
  std::vector<std::uint8_t> targets;
};

inline LabeledFeatures label_and_featurize(const RawSession& s) {
  const LabeledSeries l = assign_labels(s);
  return {featurize(l), l.target};
}

// Train/validation windows and the scaler fitted on the training part.
struct PreparedData {
  ScalerStats scaler;
  std::vector<Window> train;
  std::vector<Window> val;
  bool split_by_files = false;
};

// With two or more sessions whole files are held out for validation and the
// scaler sees only the training files. With one session the windows are
// split (stratified) and the scaler is fitted on the whole session.
// `channels` is 5 for the full feature set or 4 to drop dt.
inline PreparedData prepare_data(std::span<const RawSession> sessions, const WindowingConfig& windowing,
                                 double val_fraction, std::uint64_t seed, std::size_t channels = kFeatureCount) {
  if (sessions.empty()) throw ValidationError("prepare_data: no sessions");
  std::vector<LabeledFeatures> lf;
  for (const auto& s : sessions) lf.push_back(label_and_featurize(s));

  auto windows_of = [&](const LabeledFeatures& x, const ScalerStats& scaler) {
    const FeatureSeries scaled = scaler_transform(x.features, scaler);
    if (channels == kFeatureCount) return slice_windows(scaled.values, channels, x.targets, windowing);
    return slice_windows(four_channel(scaled), 4, x.targets, windowing);
  };

  PreparedData out;
  if (sessions.size() >= 2) {
    const Split files = split_by_file(sessions.size(), val_fraction, split_seed(seed));
    std::vector<FeatureSeries> train_feats;
    for (std::size_t f : files.train) train_feats.push_back(lf[f].features);
    out.scaler = fit_scaler(concat_features(train_feats));
    for (std::size_t f : files.train) {
      auto w = windows_of(lf[f], out.scaler);
      std::move(w.begin(), w.end(), std::back_inserter(out.train));
    }
    for (std::size_t f : files.val) {
      auto w = windows_of(lf[f], out.scaler);
      std::move(w.begin(), w.end(), std::back_inserter(out.val));
    }
    out.split_by_files = true;
  } else {
    out.scaler = fit_scaler(lf[0].features);
    auto all = windows_of(lf[0], out.scaler);
    std::vector<std::uint8_t> labels;
    for (const auto& w : all) labels.push_back(w.glob_label);
    const Split s = split_train_val(labels, val_fraction, split_seed(seed));
    for (std::size_t i : s.train) out.train.push_back(all[i]);
    for (std::size_t i : s.val) out.val.push_back(all[i]);
  }
  if (out.train.empty() || out.val.empty())
    throw ValidationError("prepare_data: not enough data for " + std::to_string(windowing.window_size) +
                          "-sample windows");
  return out;
}

// ---------------------------------------------------------------------------
// ConvLSTM

struct ConvLstmRun {
  nn::ConvLstm model;
  TrainResult result;
  Metadata metadata;
  double seq_pos_weight = 1.0;
  double glob_pos_weight = 1.0;
};

inline ConvLstmRun train_convlstm(PreparedData data, const TrainConfig& cfg, const TrainCallbacks& cb = {}) {
  cfg.validate();
  ConvLstmRun run{nn::ConvLstm(cfg.hidden), {}, {}, 1.0, 1.0};
  nn::init_params(run.model.params(), init_seed(cfg.seed));
  ConvLstmTask task(run.model, std::move(data.train), std::move(data.val));
  run.seq_pos_weight = task.seq_pos_weight();
  run.glob_pos_weight = task.glob_pos_weight();
  run.result = run_training(task, cfg, cb);
  run.model.params() = run.result.best_params;
  run.metadata = {cfg.windowing.window_size, cfg.windowing.stride, run.result.threshold, data.scaler};
  return run;
}

inline ConvLstmRun train_convlstm(std::span<const RawSession> sessions, const TrainConfig& cfg,
                                  const TrainCallbacks& cb = {}) {
  cfg.validate();
  return train_convlstm(prepare_data(sessions, cfg.windowing, cfg.val_fraction, cfg.seed), cfg, cb);
}

// Per-sample probabilities over a scaled series: mean of sigmoid(seq_logits)
// over every window (stride S) covering each index.
inline std::vector<double> convlstm_probs(const nn::ConvLstm& model, const FeatureSeries& scaled, std::size_t window,
                                          std::size_t stride) {
  nn::ConvLstmWorkspace ws;
  return batch_probs(scaled.rows(), window, stride, [&](std::size_t start, std::span<double> out) {
    model.forward(std::span<const double>(scaled.values).subspan(start * kFeatureCount, window * kFeatureCount),
                  window, ws, false);
    for (std::size_t i = 0; i < window; ++i) out[i] = nn::sigmoid(ws.seq_logits[i]);
  });
}

struct EvaluationResult {
  std::vector<double> probs;
  EventList predicted;
  EventList truth;
  ToleranceReport report;

  const ToleranceRow& at_tolerance(std::size_t tol) const {
    for (const auto& r : report)
      if (r.tolerance == tol) return r;
    throw ValidationError("tolerance " + std::to_string(tol) + " not in sweep");
  }
};

inline EvaluationResult evaluate_probs(std::vector<double> probs, std::vector<std::uint8_t> targets, double tau) {
  EvaluationResult r;
  r.probs = std::move(probs);
  r.predicted = extract_events(r.probs, tau);
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (targets[i]) r.truth.push_back(i);
  r.report = tolerance_sweep(r.predicted, r.truth);
  return r;
}

inline EvaluationResult evaluate_convlstm(const nn::ConvLstm& model, const Metadata& meta, const RawSession& session) {
  const LabeledFeatures lf = label_and_featurize(session);
  const FeatureSeries scaled = scaler_transform(lf.features, meta.scaler);
  return evaluate_probs(convlstm_probs(model, scaled, meta.window_size, meta.stride), lf.targets, meta.threshold);
}

// ---------------------------------------------------------------------------
// Window-classifier baselines

enum class BaselineKind { Logistic, Cnn };

inline std::string to_string(BaselineKind k) { return k == BaselineKind::Logistic ? "logistic" : "cnn"; }

// Baselines classify short windows (x, y, z, magnitude) as containing a
// footfall or not. Per-sample probabilities are the mean window probability
// over every window covering the sample.
struct BaselineConfig {
  BaselineKind kind = BaselineKind::Cnn;
  WindowingConfig train_windowing{50, 10};
  std::size_t eval_stride = 5;
};

struct BaselineRun {
  BaselineKind kind;
  nn::Cnn cnn;
  nn::Logistic logistic;
  TrainResult result;
  Metadata metadata;  // window_size/stride of the training windows
  std::size_t eval_stride = 5;
};

// Windows (four channels) and scaler for a baseline run.
inline PreparedData prepare_baseline_data(std::span<const RawSession> sessions, const BaselineConfig& bcfg,
                                          const TrainConfig& cfg) {
  return prepare_data(sessions, bcfg.train_windowing, cfg.val_fraction, cfg.seed, 4);
}

inline BaselineRun train_baseline(PreparedData data, const BaselineConfig& bcfg, TrainConfig cfg,
                                  const TrainCallbacks& cb = {}) {
  cfg.windowing = bcfg.train_windowing;
  cfg.validate();
  if (bcfg.kind == BaselineKind::Logistic && bcfg.train_windowing.window_size != nn::Logistic::kLength)
    throw ValidationError("logistic baseline requires 50-sample windows");
  BaselineRun run{bcfg.kind, {}, {}, {}, {}, bcfg.eval_stride};
  if (bcfg.kind == BaselineKind::Cnn) {
    nn::init_params(run.cnn.params(), init_seed(cfg.seed));
    CnnTask task(run.cnn, std::move(data.train), std::move(data.val), 4);
    run.result = run_training(task, cfg, cb);
    run.cnn.params() = run.result.best_params;
  } else {
    nn::init_params(run.logistic.params(), init_seed(cfg.seed));
    LogisticTask task(run.logistic, std::move(data.train), std::move(data.val), 4);
    run.result = run_training(task, cfg, cb);
    run.logistic.params() = run.result.best_params;
  }
  run.metadata = {cfg.windowing.window_size, cfg.windowing.stride, run.result.threshold, data.scaler};
  return run;
}

inline BaselineRun train_baseline(std::span<const RawSession> sessions, const BaselineConfig& bcfg,
                                  const TrainConfig& cfg, const TrainCallbacks& cb = {}) {
  return train_baseline(prepare_baseline_data(sessions, bcfg, cfg), bcfg, cfg, cb);
}

inline std::vector<double> baseline_probs(const BaselineRun& run, const FeatureSeries& scaled) {
  const std::size_t len = run.metadata.window_size;
  const std::vector<double> x = four_channel(scaled);
  nn::CnnWorkspace cws;
  nn::LogisticWorkspace lws;
  return batch_probs(scaled.rows(), len, run.eval_stride, [&](std::size_t start, std::span<double> out) {
    const auto win = std::span<const double>(x).subspan(start * 4, len * 4);
    double logit = 0.0;
    if (run.kind == BaselineKind::Cnn) {
      run.cnn.forward(win, 1, len, cws, false);
      logit = cws.logits[0];
    } else {
      logit = run.logistic.forward_one(win);
    }
    std::fill(out.begin(), out.end(), nn::sigmoid(logit));
  });
}

inline EvaluationResult evaluate_baseline(const BaselineRun& run, const RawSession& session) {
  const LabeledFeatures lf = label_and_featurize(session);
  const FeatureSeries scaled = scaler_transform(lf.features, run.metadata.scaler);
  return evaluate_probs(baseline_probs(run, scaled), lf.targets, run.metadata.threshold);
}

}  // namespace footfall

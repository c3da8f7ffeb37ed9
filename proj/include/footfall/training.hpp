#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "footfall/error.hpp"
#include "footfall/evaluation.hpp"
#include "footfall/features.hpp"
#include "footfall/nn/cnn.hpp"
#include "footfall/nn/convlstm.hpp"
#include "footfall/nn/logistic.hpp"
#include "footfall/nn/tensor.hpp"
#include "footfall/nn/weights_io.hpp"
#include "footfall/windowing.hpp"

namespace footfall {

// ---------------------------------------------------------------------------
// Loss

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Mean of pw*t*softplus(-z) + (1-t)*softplus(z).
inline double bce_with_logits(std::span<const double> logits, std::span<const std::uint8_t> targets, double pos_weight) {
  if (logits.size() != targets.size()) throw ShapeError("bce_with_logits: length mismatch");
  if (logits.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    sum += targets[i] ? pos_weight * softplus(-logits[i]) : softplus(logits[i]);
  return sum / static_cast<double>(logits.size());
}

// d/dz of one (unaveraged) BCE term.
inline double bce_grad(double z, std::uint8_t t, double pos_weight) {
  return t ? -pos_weight * nn::sigmoid(-z) : nn::sigmoid(z);
}

// #neg / #pos; 1 when either class is absent.
inline double compute_pos_weight(std::span<const std::uint8_t> targets) {
  if (targets.empty()) throw ValidationError("compute_pos_weight: empty targets");
  const auto pos = static_cast<std::size_t>(std::count_if(targets.begin(), targets.end(), [](auto t) { return t != 0; }));
  const std::size_t neg = targets.size() - pos;
  if (pos == 0 || neg == 0) return 1.0;
  return static_cast<double>(neg) / static_cast<double>(pos);
}

// ---------------------------------------------------------------------------
// Optimization

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// Decoupled weight decay followed by a bias-corrected Adam update. Leaves
// everything untouched if any gradient is non-finite.
inline void adamw_step(nn::ParamSet& params, const nn::ParamSet& grads, AdamWState& state, const AdamWConfig& cfg) {
  if (grads.size() != params.size()) throw ShapeError("adamw_step: gradient layout mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (params.trainable(i) && !nn::all_finite(grads[i].span()))
      throw NonFiniteError("adamw_step: non-finite gradient in '" + grads.name(i) + "'");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.trainable(i)) continue;
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] *= decay;
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm. Returns the norm before clipping.
inline double clip_grad_norm(nn::ParamSet& grads, double max_norm = 5.0) {
  double ss = 0.0;
  for (const auto& e : grads)
    for (double g : e.tensor.data) ss += g * g;
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& e : grads)
      for (double& g : e.tensor.data) g *= scale;
  }
  return norm;
}

// Reduce-on-plateau for a metric that should increase.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor = 0.5, std::size_t patience = 5, double min_lr = 1e-6)
      : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr) {}

  double step(double metric) {
    if (!has_best_ || metric > best_) {
      best_ = metric;
      has_best_ = true;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ > patience_) {
      lr_ = std::max(lr_ * factor_, min_lr_);
      bad_epochs_ = 0;
    }
    return lr_;
  }

  double lr() const { return lr_; }
  std::size_t bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double min_lr_;
  double best_ = 0.0;
  bool has_best_ = false;
  std::size_t bad_epochs_ = 0;
};

// ---------------------------------------------------------------------------
// Data split and threshold selection

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Stratified by label: each class contributes round(fraction * n) of its
// members (at least one, and at least one left for training when it has two
// or more) to validation.
inline Split split_train_val(std::span<const std::uint8_t> labels, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ValidationError("split_train_val: fraction must be in (0,1)");
  if (labels.size() < 2) throw ValidationError("split_train_val: need at least 2 windows");
  std::mt19937_64 rng(seed);
  Split out;
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if ((labels[i] != 0) == (cls != 0)) idx.push_back(i);
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_val = 1;
    if (idx.size() >= 2)
      n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(val_fraction * idx.size())), 1,
                                      idx.size() - 1);
    out.val.insert(out.val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

// Whole-file split for multi-session datasets: ceil(fraction * files) files
// (at least one, leaving at least one for training) go to validation.
inline Split split_by_file(std::size_t file_count, double val_fraction, std::uint64_t seed) {
  if (file_count < 2) throw ValidationError("split_by_file: need at least 2 files");
  std::vector<std::size_t> files(file_count);
  std::iota(files.begin(), files.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(files.begin(), files.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(file_count))), 1, file_count - 1);
  Split s;
  s.val.assign(files.begin(), files.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(files.begin() + static_cast<std::ptrdiff_t>(n_val), files.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

struct SweepResult {
  double threshold = 0.9;
  double f1 = 0.0;
};

inline double sweep_threshold(std::size_t k) { return static_cast<double>(k) / 100.0; }

// Exact per-sample F1 of (probs > tau) for tau in {0.01, ..., 0.90}; ties go
// to the larger threshold.
inline SweepResult threshold_sweep(std::span<const double> probs, std::span<const std::uint8_t> targets) {
  if (probs.size() != targets.size()) throw ShapeError("threshold_sweep: length mismatch");
  SweepResult best{sweep_threshold(1), -1.0};
  // F1 = 2tp / (2tp + fp + fn); compared as fractions so exact ties are
  // recognised as ties.
  std::uint64_t best_num = 0, best_den = 0;
  for (std::size_t k = 1; k <= 90; ++k) {
    const double tau = sweep_threshold(k);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const bool p = probs[i] > tau;
      if (p && targets[i]) ++tp;
      else if (p) ++fp;
      else if (targets[i]) ++fn;
    }
    const std::uint64_t num = 2 * tp, den = 2 * tp + fp + fn;
    const bool better = best_den == 0 || (den == 0 ? best_num == 0 : num * best_den >= best_num * den);
    if (better) {
      best = {tau, prf(tp, fn, fp).f1};
      best_num = num;
      best_den = den == 0 ? 1 : den;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Configuration, reports, metadata

struct TrainConfig {
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::size_t epochs = 50;
  double weight_decay = 1e-2;
  double clip_norm = 5.0;
  double oversample = 10.0;
  double sched_factor = 0.5;
  std::size_t sched_patience = 5;
  double min_lr = 1e-6;
  std::uint64_t seed = 42;
  double val_fraction = 0.2;
  std::size_t hidden = 128;
  WindowingConfig windowing;

  void validate() const {
    if (batch_size == 0 || !(lr > 0) || !(weight_decay >= 0) || !(clip_norm > 0) || !(oversample > 0) ||
        !(sched_factor > 0 && sched_factor < 1) || !(min_lr > 0) || hidden == 0)
      throw ValidationError("TrainConfig: invalid hyperparameter");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ValidationError("TrainConfig: val_fraction must be in (0,1)");
    windowing.validate();
  }
};

struct EpochReport {
  std::size_t epoch = 0;
  double seq_loss = 0.0;
  double glob_loss = 0.0;
  double total_loss = 0.0;
  double lr = 0.0;
  double val_f1 = 0.0;
  double threshold = 0.0;
  std::size_t skipped_batches = 0;

  friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

inline std::string epoch_csv_header() { return "epoch,seq_loss,glob_loss,total_loss,lr,val_f1,threshold"; }

inline std::string epoch_csv_row(const EpochReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.epoch << ',' << r.seq_loss << ',' << r.glob_loss << ',' << r.total_loss << ',' << r.lr << ',' << r.val_f1
     << ',' << r.threshold;
  return os.str();
}

inline nlohmann::json epoch_json(const EpochReport& r) {
  return {{"event", "epoch"},      {"epoch", r.epoch}, {"seq_loss", r.seq_loss}, {"glob_loss", r.glob_loss},
          {"total_loss", r.total_loss}, {"lr", r.lr},  {"val_f1", r.val_f1},     {"threshold", r.threshold}};
}

struct Metadata {
  std::size_t window_size = 600;
  std::size_t stride = 150;
  double threshold = 0.5;
  ScalerStats scaler;
};

inline constexpr double kMinThreshold = 0.01;
inline constexpr double kMaxThreshold = 0.90;

inline void validate_metadata(const Metadata& m) {
  if (m.window_size == 0 || m.stride == 0 || m.stride > m.window_size)
    throw ValidationError("metadata: need 1 <= stride <= window_size");
  if (!(m.threshold >= kMinThreshold - 1e-12 && m.threshold <= kMaxThreshold + 1e-12))
    throw ValidationError("metadata: threshold " + std::to_string(m.threshold) + " outside [0.01, 0.90]");
  validate_scaler(m.scaler);
}

inline nlohmann::json metadata_to_json(const Metadata& m) {
  return {{"window_size", m.window_size},
          {"stride", m.stride},
          {"threshold", m.threshold},
          {"scaler", scaler_to_json(m.scaler)}};
}

inline Metadata metadata_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("metadata: expected a JSON object");
  for (const char* key : {"window_size", "stride", "threshold", "scaler"})
    if (!j.contains(key)) throw FormatError(std::string("metadata: missing '") + key + "'");
  Metadata m;
  try {
    m.window_size = j.at("window_size").get<std::size_t>();
    m.stride = j.at("stride").get<std::size_t>();
    m.threshold = j.at("threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metadata: ") + e.what());
  }
  m.scaler = scaler_from_json(j.at("scaler"));
  validate_metadata(m);
  return m;
}

inline void save_metadata(const Metadata& m, const std::filesystem::path& path) {
  nn::write_text_file(path, metadata_to_json(m).dump(2) + "\n");
}

inline Metadata load_metadata(const std::filesystem::path& path) {
  return metadata_from_json(nn::parse_json(nn::read_text_file(path), "metadata " + path.string()));
}

// ---------------------------------------------------------------------------
// Training tasks. A task owns the model-specific forward/backward and loss;
// run_training() owns sampling, optimization, scheduling and checkpointing.

struct LossParts {
  double seq = 0.0;
  double glob = 0.0;
  double total() const { return seq + glob; }
};

template <class T>
concept TrainingTask = requires(T t, std::span<const std::size_t> idx, nn::ParamSet& grads, std::mt19937_64& rng,
                                std::vector<double>& probs, std::vector<std::uint8_t>& targets, double factor) {
  { t.params() } -> std::same_as<nn::ParamSet&>;
  { t.train_size() } -> std::convertible_to<std::size_t>;
  { t.sampler_weights(factor) } -> std::convertible_to<std::vector<double>>;
  { t.batch(idx, grads, rng) } -> std::same_as<LossParts>;
  t.validation(probs, targets);
};

// Dual-head task: mean per-step BCE plus mean per-window BCE, each with its
// own pos_weight computed once from the training windows.
class ConvLstmTask {
 public:
  ConvLstmTask(nn::ConvLstm& model, std::vector<Window> train, std::vector<Window> val)
      : model_(model), train_(std::move(train)), val_(std::move(val)) {
    if (train_.empty()) throw ValidationError("ConvLstmTask: no training windows");
    window_ = train_.front().seq_labels.size();
    std::vector<std::uint8_t> seq, glob;
    for (const auto& w : train_) {
      seq.insert(seq.end(), w.seq_labels.begin(), w.seq_labels.end());
      glob.push_back(w.glob_label);
    }
    seq_pos_weight_ = compute_pos_weight(seq);
    glob_pos_weight_ = compute_pos_weight(glob);
  }

  nn::ParamSet& params() { return model_.params(); }
  std::size_t train_size() const { return train_.size(); }
  double seq_pos_weight() const { return seq_pos_weight_; }
  double glob_pos_weight() const { return glob_pos_weight_; }
  std::vector<double> sampler_weights(double factor) const { return footfall::sampler_weights(train_, factor); }

  LossParts batch(std::span<const std::size_t> idx, nn::ParamSet& grads, std::mt19937_64& rng) {
    const double b = static_cast<double>(idx.size());
    const double bw = b * static_cast<double>(window_);
    LossParts loss;
    d_seq_.resize(window_);
    for (std::size_t i : idx) {
      const Window& w = train_[i];
      model_.forward(w.feats, window_, ws_, true, &rng);
      for (std::size_t t = 0; t < window_; ++t) {
        const double z = ws_.seq_logits[t];
        const auto y = w.seq_labels[t];
        loss.seq += (y ? seq_pos_weight_ * softplus(-z) : softplus(z)) / bw;
        d_seq_[t] = bce_grad(z, y, seq_pos_weight_) / bw;
      }
      const double z = ws_.glob_logit;
      loss.glob += (w.glob_label ? glob_pos_weight_ * softplus(-z) : softplus(z)) / b;
      model_.backward(ws_, d_seq_, bce_grad(z, w.glob_label, glob_pos_weight_) / b, grads);
    }
    return loss;
  }

  void validation(std::vector<double>& probs, std::vector<std::uint8_t>& targets) {
    probs.clear();
    targets.clear();
    for (const auto& w : val_) {
      model_.forward(w.feats, window_, ws_, false);
      for (double z : ws_.seq_logits) probs.push_back(nn::sigmoid(z));
      targets.insert(targets.end(), w.seq_labels.begin(), w.seq_labels.end());
    }
  }

 private:
  nn::ConvLstm& model_;
  std::vector<Window> train_;
  std::vector<Window> val_;
  std::size_t window_ = 0;
  double seq_pos_weight_ = 1.0;
  double glob_pos_weight_ = 1.0;
  nn::ConvLstmWorkspace ws_;
  std::vector<double> d_seq_;
};

// Single-logit window classifier (CNN or logistic baseline) trained on
// glob_label with BCE and pos_weight from the training windows.
template <class Model, class Workspace>
class WindowClassifierTask {
 public:
  WindowClassifierTask(Model& model, std::vector<Window> train, std::vector<Window> val, std::size_t channels)
      : model_(model), train_(std::move(train)), val_(std::move(val)), channels_(channels) {
    if (train_.empty()) throw ValidationError("WindowClassifierTask: no training windows");
    length_ = train_.front().seq_labels.size();
    std::vector<std::uint8_t> glob;
    for (const auto& w : train_) glob.push_back(w.glob_label);
    pos_weight_ = compute_pos_weight(glob);
  }

  nn::ParamSet& params() { return model_.params(); }
  std::size_t train_size() const { return train_.size(); }
  double pos_weight() const { return pos_weight_; }
  std::vector<double> sampler_weights(double factor) const { return footfall::sampler_weights(train_, factor); }

  LossParts batch(std::span<const std::size_t> idx, nn::ParamSet& grads, std::mt19937_64&) {
    input_.clear();
    labels_.clear();
    for (std::size_t i : idx) {
      input_.insert(input_.end(), train_[i].feats.begin(), train_[i].feats.end());
      labels_.push_back(train_[i].glob_label);
    }
    const std::size_t b = idx.size();
    model_.forward(input_, b, length_, ws_, true);
    if constexpr (requires { model_.commit_running_stats(ws_); }) model_.commit_running_stats(ws_);
    LossParts loss;
    loss.glob = bce_with_logits(ws_.logits, labels_, pos_weight_);
    d_logits_.resize(b);
    for (std::size_t n = 0; n < b; ++n)
      d_logits_[n] = bce_grad(ws_.logits[n], labels_[n], pos_weight_) / static_cast<double>(b);
    model_.backward(ws_, d_logits_, grads);
    return loss;
  }

  void validation(std::vector<double>& probs, std::vector<std::uint8_t>& targets) {
    probs.clear();
    targets.clear();
    for (const auto& w : val_) targets.push_back(w.glob_label);
    for (double p : predict(model_, val_, length_)) probs.push_back(p);
  }

  // Window probabilities in chunks, inference mode.
  static std::vector<double> predict(const Model& model, std::span<const Window> windows, std::size_t length) {
    std::vector<double> out;
    Workspace ws;
    std::vector<double> input;
    constexpr std::size_t kChunk = 256;
    for (std::size_t s = 0; s < windows.size(); s += kChunk) {
      const std::size_t e = std::min(windows.size(), s + kChunk);
      input.clear();
      for (std::size_t i = s; i < e; ++i) input.insert(input.end(), windows[i].feats.begin(), windows[i].feats.end());
      model.forward(input, e - s, length, ws, false);
      for (double z : ws.logits) out.push_back(nn::sigmoid(z));
    }
    return out;
  }

 private:
  Model& model_;
  std::vector<Window> train_;
  std::vector<Window> val_;
  std::size_t channels_;
  std::size_t length_ = 0;
  double pos_weight_ = 1.0;
  Workspace ws_;
  std::vector<double> input_;
  std::vector<std::uint8_t> labels_;
  std::vector<double> d_logits_;
};

using CnnTask = WindowClassifierTask<nn::Cnn, nn::CnnWorkspace>;
using LogisticTask = WindowClassifierTask<nn::Logistic, nn::LogisticWorkspace>;

// ---------------------------------------------------------------------------
// Loop

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  nn::ParamSet best_params;
  double threshold = 0.5;
  double best_f1 = -1.0;
  bool has_checkpoint = false;
  std::vector<EpochReport> reports;
};

struct TrainCallbacks {
  std::function<void(const EpochReport&)> on_epoch;
  // Called with the new best parameters whenever validation F1 strictly improves.
  std::function<void(const nn::ParamSet&, double threshold, std::size_t epoch)> on_checkpoint;
};

template <TrainingTask Task>
TrainResult run_training(Task& task, const TrainConfig& cfg, const TrainCallbacks& cb = {}) {
  cfg.validate();
  TrainResult result;
  result.best_params = task.params();
  if (cfg.epochs == 0) return result;

  std::mt19937_64 rng(cfg.seed);
  AdamWConfig opt{cfg.lr, cfg.weight_decay};
  AdamWState state;
  PlateauScheduler sched(cfg.lr, cfg.sched_factor, cfg.sched_patience, cfg.min_lr);
  nn::ParamSet grads = task.params().zeros_like();
  const std::vector<double> weights = task.sampler_weights(cfg.oversample);
  std::vector<double> probs;
  std::vector<std::uint8_t> targets;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochReport rep;
    rep.epoch = epoch;
    rep.lr = opt.lr;
    const auto order = weighted_sample_epoch(weights, task.train_size(), rng);
    double seq_sum = 0.0, glob_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), s + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + s, e - s);
      grads.fill_zero();
      const LossParts loss = task.batch(idx, grads, rng);
      if (!std::isfinite(loss.total())) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", batch starting at " << s << " (seq=" << loss.seq
           << ", glob=" << loss.glob << ", lr=" << opt.lr << ")";
        throw TrainingError(os.str());
      }
      seq_sum += loss.seq * static_cast<double>(idx.size());
      glob_sum += loss.glob * static_cast<double>(idx.size());
      seen += idx.size();
      clip_grad_norm(grads, cfg.clip_norm);
      try {
        adamw_step(task.params(), grads, state, opt);
      } catch (const NonFiniteError&) {
        ++rep.skipped_batches;
      }
    }
    rep.seq_loss = seq_sum / static_cast<double>(seen);
    rep.glob_loss = glob_sum / static_cast<double>(seen);
    rep.total_loss = rep.seq_loss + rep.glob_loss;

    task.validation(probs, targets);
    const SweepResult sweep = threshold_sweep(probs, targets);
    rep.val_f1 = sweep.f1;
    rep.threshold = sweep.threshold;
    if (sweep.f1 > result.best_f1) {
      result.best_f1 = sweep.f1;
      result.threshold = sweep.threshold;
      result.best_params = task.params();
      result.has_checkpoint = true;
      if (cb.on_checkpoint) cb.on_checkpoint(result.best_params, sweep.threshold, epoch);
    }
    opt.lr = sched.step(sweep.f1);
    result.reports.push_back(rep);
    if (cb.on_epoch) cb.on_epoch(rep);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dataset preparation and export

struct PreparedSeries {
  FeatureSeries features;  // scaled
  std::vector<std::uint8_t> targets;
};

inline PreparedSeries prepare_series(const RawSession& session, const ScalerStats& scaler) {
  const LabeledSeries labeled = assign_labels(session);
  return {scaler_transform(featurize(labeled), scaler), labeled.target};
}

// Drops the dt column: the baselines use x, y, z, magnitude.
inline std::vector<double> four_channel(const FeatureSeries& f) {
  std::vector<double> out;
  out.reserve(f.rows() * 4);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    const auto r = f.row(i);
    out.insert(out.end(), r.begin(), r.begin() + 4);
  }
  return out;
}

struct ExportPaths {
  std::filesystem::path weights;
  std::filesystem::path metadata;
};

inline Metadata export_model(const nn::ParamSet& params, const ScalerStats& scaler, double threshold,
                             const WindowingConfig& windowing, const ExportPaths& paths) {
  Metadata m{windowing.window_size, windowing.stride, threshold, scaler};
  validate_metadata(m);
  nn::save_weights(params, paths.weights);
  save_metadata(m, paths.metadata);
  return m;
}

}  // namespace footfall

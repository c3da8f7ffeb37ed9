#pragma once

#include <array>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "footfall/error.hpp"
#include "footfall/nn/kernels.hpp"
#include "footfall/nn/lstm.hpp"
#include "footfall/nn/tensor.hpp"

namespace footfall::nn {

// Recorded intermediates of one ConvLstm forward pass, reusable across calls.
// Buffers are sized on first use for a given (window, hidden) and not
// reallocated afterwards, so steady-state inference does not allocate.
struct ConvLstmWorkspace {
  std::size_t steps = 0;
  std::size_t hidden = 0;

  std::vector<double> input_t;  // 5 x W
  std::vector<double> conv1;    // 16 x W, post-ReLU
  std::vector<double> conv2;    // 5 x W, post-ReLU
  std::vector<double> lstm_in;  // W x 5
  std::array<std::array<LstmDirectionCache, 2>, 2> dirs;
  std::vector<double> out0;          // W x 2H
  std::vector<double> dropout_mask;  // W x 2H
  std::vector<double> in1;           // W x 2H, layer-1 input after dropout
  std::vector<double> out1;          // W x 2H
  std::vector<double> seq_logits;    // W
  double glob_logit = 0.0;
  bool has_forward = false;

  std::vector<double> d_out1, d_in1, d_lstm_in, d_conv2, d_conv1;

  void ensure(std::size_t w, std::size_t h, std::size_t conv_channels, std::size_t in_channels) {
    if (w == steps && h == hidden) return;
    steps = w;
    hidden = h;
    input_t.assign(in_channels * w, 0.0);
    conv1.assign(conv_channels * w, 0.0);
    conv2.assign(in_channels * w, 0.0);
    lstm_in.assign(w * in_channels, 0.0);
    for (auto& layer : dirs)
      for (auto& d : layer) d.ensure(w, h);
    out0.assign(w * 2 * h, 0.0);
    dropout_mask.assign(w * 2 * h, 1.0);
    in1.assign(w * 2 * h, 0.0);
    out1.assign(w * 2 * h, 0.0);
    seq_logits.assign(w, 0.0);
    d_out1.assign(w * 2 * h, 0.0);
    d_in1.assign(w * 2 * h, 0.0);
    d_lstm_in.assign(w * in_channels, 0.0);
    d_conv2.assign(in_channels * w, 0.0);
    d_conv1.assign(conv_channels * w, 0.0);
  }
};

// conv(5->16,k3) -> ReLU -> conv(16->5,k3) -> ReLU -> 2-layer BiLSTM ->
// per-step head and a whole-window head on the last step's output.
class ConvLstm {
 public:
  static constexpr std::size_t kInputChannels = 5;
  static constexpr std::size_t kConvChannels = 16;
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kLayers = 2;

  explicit ConvLstm(std::size_t hidden = 128, double dropout = 0.3) : hidden_(hidden), dropout_(dropout) {
    if (hidden == 0) throw ValidationError("ConvLstm: hidden size must be >= 1");
    const std::size_t h = hidden;
    conv1_w_ = params_.add("conv1_w", {kConvChannels, kInputChannels, kKernel}, kInputChannels * kKernel);
    conv1_b_ = params_.add("conv1_b", {kConvChannels}, 0);
    conv2_w_ = params_.add("conv2_w", {kInputChannels, kConvChannels, kKernel}, kConvChannels * kKernel);
    conv2_b_ = params_.add("conv2_b", {kInputChannels}, 0);
    for (std::size_t l = 0; l < kLayers; ++l) {
      const std::size_t in = l == 0 ? kInputChannels : 2 * h;
      for (std::size_t d = 0; d < 2; ++d) {
        const std::string p = lstm_prefix(l, d);
        lstm_[l][d] = {params_.add(p + "w_ih", {4 * h, in}, in), params_.add(p + "w_hh", {4 * h, h}, h),
                       params_.add(p + "b_ih", {4 * h}, 0), params_.add(p + "b_hh", {4 * h}, 0)};
      }
    }
    seq_w_ = params_.add("seq_head_w", {1, 2 * h}, 2 * h);
    seq_b_ = params_.add("seq_head_b", {1}, 0);
    glob_w_ = params_.add("glob_head_w", {1, 2 * h}, 2 * h);
    glob_b_ = params_.add("glob_head_b", {1}, 0);
  }

  static std::string lstm_prefix(std::size_t layer, std::size_t dir) {
    return "lstm.l" + std::to_string(layer) + (dir == 0 ? ".fwd." : ".bwd.");
  }

  std::size_t hidden() const { return hidden_; }
  double dropout() const { return dropout_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // window: W x 5 row-major. Results land in ws.seq_logits / ws.glob_logit.
  // Dropout between the LSTM layers is active only when `training` is set
  // (and then `rng` is required).
  void forward(std::span<const double> window, std::size_t steps, ConvLstmWorkspace& ws, bool training,
               std::mt19937_64* rng = nullptr) const {
    if (steps == 0) throw ShapeError("ConvLstm: window must have at least one step");
    if (window.size() != steps * kInputChannels)
      throw ShapeError("ConvLstm: window has " + std::to_string(window.size()) + " values, expected W*5 = " +
                       std::to_string(steps * kInputChannels));
    if (!all_finite(window)) throw NonFiniteError("ConvLstm: non-finite input");
    if (training && dropout_ > 0.0 && !rng) throw StateError("ConvLstm: training forward needs an rng");
    const std::size_t h = hidden_;
    const std::size_t w2 = 2 * h;
    ws.ensure(steps, h, kConvChannels, kInputChannels);

    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t c = 0; c < kInputChannels; ++c) ws.input_t[c * steps + t] = window[t * kInputChannels + c];

    const Conv1dShape s1{kInputChannels, kConvChannels, kKernel, 1};
    const Conv1dShape s2{kConvChannels, kInputChannels, kKernel, 1};
    conv1d_forward<double>(ws.input_t, steps, params_[conv1_w_].span(), params_[conv1_b_].span(), s1, ws.conv1);
    relu(ws.conv1);
    conv1d_forward<double>(ws.conv1, steps, params_[conv2_w_].span(), params_[conv2_b_].span(), s2, ws.conv2);
    relu(ws.conv2);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t c = 0; c < kInputChannels; ++c) ws.lstm_in[t * kInputChannels + c] = ws.conv2[c * steps + t];

    for (std::size_t d = 0; d < 2; ++d)
      lstm_direction_forward(ws.lstm_in.data(), steps, lstm_weights(0, d), d == 1, ws.dirs[0][d], ws.out0.data(), w2,
                             d * h);

    if (training && dropout_ > 0.0) {
      const double keep = 1.0 - dropout_;
      std::bernoulli_distribution bern(keep);
      for (std::size_t i = 0; i < ws.out0.size(); ++i) {
        ws.dropout_mask[i] = bern(*rng) ? 1.0 / keep : 0.0;
        ws.in1[i] = ws.out0[i] * ws.dropout_mask[i];
      }
    } else {
      std::fill(ws.dropout_mask.begin(), ws.dropout_mask.end(), 1.0);
      std::copy(ws.out0.begin(), ws.out0.end(), ws.in1.begin());
    }

    for (std::size_t d = 0; d < 2; ++d)
      lstm_direction_forward(ws.in1.data(), steps, lstm_weights(1, d), d == 1, ws.dirs[1][d], ws.out1.data(), w2,
                             d * h);

    const double* sw = params_[seq_w_].ptr();
    const double sb = params_[seq_b_].data[0];
    for (std::size_t t = 0; t < steps; ++t) ws.seq_logits[t] = dot(sw, ws.out1.data() + t * w2, w2) + sb;
    ws.glob_logit = dot(params_[glob_w_].ptr(), ws.out1.data() + (steps - 1) * w2, w2) + params_[glob_b_].data[0];
    ws.has_forward = true;
  }

  // Accumulates into `grads` (layout of params()) the gradient of a loss
  // whose derivatives w.r.t. the outputs are d_seq (length W) and d_glob.
  void backward(ConvLstmWorkspace& ws, std::span<const double> d_seq, double d_glob, ParamSet& grads) const {
    if (!ws.has_forward) throw StateError("ConvLstm: backward called without a recorded forward pass");
    const std::size_t steps = ws.steps;
    if (d_seq.size() != steps) throw ShapeError("ConvLstm: d_seq length must equal window length");
    const std::size_t h = hidden_;
    const std::size_t w2 = 2 * h;

    // Heads.
    std::fill(ws.d_out1.begin(), ws.d_out1.end(), 0.0);
    const double* sw = params_[seq_w_].ptr();
    double* gsw = grads[seq_w_].ptr();
    double& gsb = grads[seq_b_].data[0];
    for (std::size_t t = 0; t < steps; ++t) {
      const double g = d_seq[t];
      if (g == 0.0) continue;
      axpy(g, sw, ws.d_out1.data() + t * w2, w2);
      axpy(g, ws.out1.data() + t * w2, gsw, w2);
      gsb += g;
    }
    if (d_glob != 0.0) {
      axpy(d_glob, params_[glob_w_].ptr(), ws.d_out1.data() + (steps - 1) * w2, w2);
      axpy(d_glob, ws.out1.data() + (steps - 1) * w2, grads[glob_w_].ptr(), w2);
      grads[glob_b_].data[0] += d_glob;
    }

    // LSTM layer 1, dropout, layer 0.
    std::fill(ws.d_in1.begin(), ws.d_in1.end(), 0.0);
    for (std::size_t d = 0; d < 2; ++d)
      lstm_direction_backward(ws.in1.data(), steps, lstm_weights(1, d), d == 1, ws.dirs[1][d], ws.d_out1.data(), w2,
                              d * h, lstm_grads(grads, 1, d), ws.d_in1.data());
    for (std::size_t i = 0; i < ws.d_in1.size(); ++i) ws.d_in1[i] *= ws.dropout_mask[i];
    std::fill(ws.d_lstm_in.begin(), ws.d_lstm_in.end(), 0.0);
    for (std::size_t d = 0; d < 2; ++d)
      lstm_direction_backward(ws.lstm_in.data(), steps, lstm_weights(0, d), d == 1, ws.dirs[0][d], ws.d_in1.data(),
                              w2, d * h, lstm_grads(grads, 0, d), ws.d_lstm_in.data());

    // Convolutions.
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t c = 0; c < kInputChannels; ++c) {
        const std::size_t i = c * steps + t;
        ws.d_conv2[i] = ws.conv2[i] > 0.0 ? ws.d_lstm_in[t * kInputChannels + c] : 0.0;
      }
    const Conv1dShape s1{kInputChannels, kConvChannels, kKernel, 1};
    const Conv1dShape s2{kConvChannels, kInputChannels, kKernel, 1};
    std::fill(ws.d_conv1.begin(), ws.d_conv1.end(), 0.0);
    conv1d_backward<double>(ws.conv1, steps, params_[conv2_w_].span(), s2, ws.d_conv2, ws.d_conv1,
                            grads[conv2_w_].span(), grads[conv2_b_].span());
    for (std::size_t i = 0; i < ws.d_conv1.size(); ++i)
      if (!(ws.conv1[i] > 0.0)) ws.d_conv1[i] = 0.0;
    conv1d_backward<double>(ws.input_t, steps, params_[conv1_w_].span(), s1, ws.d_conv1, std::span<double>{},
                            grads[conv1_w_].span(), grads[conv1_b_].span());
    ws.has_forward = false;
  }

  LstmWeights lstm_weights(std::size_t layer, std::size_t dir) const {
    const auto& idx = lstm_[layer][dir];
    return {params_[idx[0]].ptr(), params_[idx[1]].ptr(), params_[idx[2]].ptr(), params_[idx[3]].ptr(),
            layer == 0 ? kInputChannels : 2 * hidden_, hidden_};
  }

 private:
  static void relu(std::vector<double>& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
  }

  LstmGradients lstm_grads(ParamSet& grads, std::size_t layer, std::size_t dir) const {
    const auto& idx = lstm_[layer][dir];
    return {grads[idx[0]].ptr(), grads[idx[1]].ptr(), grads[idx[2]].ptr(), grads[idx[3]].ptr()};
  }

  std::size_t hidden_;
  double dropout_;
  ParamSet params_;
  std::size_t conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  std::array<std::array<std::array<std::size_t, 4>, 2>, kLayers> lstm_{};
  std::size_t seq_w_, seq_b_, glob_w_, glob_b_;
};

}  // namespace footfall::nn

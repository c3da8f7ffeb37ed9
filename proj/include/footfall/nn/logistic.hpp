#pragma once

#include <span>
#include <string>
#include <vector>

#include "footfall/error.hpp"
#include "footfall/nn/kernels.hpp"
#include "footfall/nn/tensor.hpp"

namespace footfall::nn {

struct LogisticWorkspace {
  std::size_t batch = 0;
  std::vector<double> x;  // B x (L*C), flattened windows
  std::vector<double> logits;
  bool has_forward = false;
};

// One linear layer over a flattened 50 x 4 window.
class Logistic {
 public:
  static constexpr std::size_t kLength = 50;
  static constexpr std::size_t kChannels = 4;
  static constexpr std::size_t kInputs = kLength * kChannels;

  Logistic() {
    w_ = params_.add("w", {kInputs}, kInputs);
    b_ = params_.add("b", {1}, 0);
  }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Single window, row-major 50 x 4.
  double forward_one(std::span<const double> window) const {
    if (window.size() != kInputs)
      throw ShapeError("Logistic: window has " + std::to_string(window.size()) + " values, expected 50*4 = 200");
    return dot(params_[w_].ptr(), window.data(), kInputs) + params_[b_].data[0];
  }

  void forward(std::span<const double> batch, std::size_t b, std::size_t length, LogisticWorkspace& ws,
               bool /*training*/) const {
    if (length != kLength) throw ShapeError("Logistic: window length must be 50, got " + std::to_string(length));
    if (b == 0 || batch.size() != b * kInputs) throw ShapeError("Logistic: batch must be B x 50 x 4");
    if (!all_finite(batch)) throw NonFiniteError("Logistic: non-finite input");
    ws.batch = b;
    ws.x.assign(batch.begin(), batch.end());
    ws.logits.resize(b);
    for (std::size_t n = 0; n < b; ++n) ws.logits[n] = forward_one(batch.subspan(n * kInputs, kInputs));
    ws.has_forward = true;
  }

  void backward(LogisticWorkspace& ws, std::span<const double> d_logits, ParamSet& grads) const {
    if (!ws.has_forward) throw StateError("Logistic: backward called without a recorded forward pass");
    if (d_logits.size() != ws.batch) throw ShapeError("Logistic: d_logits length must equal batch size");
    for (std::size_t n = 0; n < ws.batch; ++n) {
      axpy(d_logits[n], ws.x.data() + n * kInputs, grads[w_].ptr(), kInputs);
      grads[b_].data[0] += d_logits[n];
    }
    ws.has_forward = false;
  }

 private:
  ParamSet params_;
  std::size_t w_, b_;
};

}  // namespace footfall::nn

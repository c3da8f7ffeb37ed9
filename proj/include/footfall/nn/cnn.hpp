#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "footfall/error.hpp"
#include "footfall/nn/kernels.hpp"
#include "footfall/nn/tensor.hpp"

namespace footfall::nn {

struct BatchNormCache {
  std::vector<double> xhat;     // B x C x L
  std::vector<double> inv_std;  // C
  std::vector<double> mean;     // C, batch statistics (training)
  std::vector<double> var;      // C, biased batch variance (training)
};

struct CnnWorkspace {
  std::size_t batch = 0;
  std::size_t length = 0;
  bool training = false;
  bool has_forward = false;

  std::vector<double> x;                // B x 4 x L
  std::vector<double> z1, a1, p1;       // conv1 out, post BN+ReLU, pooled
  std::vector<std::size_t> p1_idx;      // argmax position per pooled value
  std::vector<double> z2, a2, p2;
  std::vector<std::size_t> p2_idx;
  std::vector<double> z3;               // B x 64 x L4
  std::vector<double> pooled;           // B x 64
  std::vector<double> u;                // B x 64, fc1 post-ReLU
  std::vector<double> logits;           // B
  BatchNormCache bn1, bn2;
};

// Window classifier: two conv+BN+ReLU+maxpool(2) blocks, a third conv,
// global average pooling, then fc 64->64 (ReLU) -> fc 64->1.
class Cnn {
 public:
  static constexpr std::size_t kInputChannels = 4;
  static constexpr std::size_t kC1 = 32;
  static constexpr std::size_t kC2 = 64;
  static constexpr std::size_t kC3 = 64;
  static constexpr std::size_t kFc = 64;
  static constexpr double kBnMomentum = 0.1;
  static constexpr double kBnEps = 1e-5;
  static constexpr std::size_t kMinLength = 4;

  Cnn() {
    c1_w_ = params_.add("block1.conv.w", {kC1, kInputChannels, 5}, kInputChannels * 5);
    c1_b_ = params_.add("block1.conv.b", {kC1}, 0);
    bn1_ = add_bn("block1.bn", kC1);
    c2_w_ = params_.add("block2.conv.w", {kC2, kC1, 5}, kC1 * 5);
    c2_b_ = params_.add("block2.conv.b", {kC2}, 0);
    bn2_ = add_bn("block2.bn", kC2);
    c3_w_ = params_.add("conv3.w", {kC3, kC2, 3}, kC2 * 3);
    c3_b_ = params_.add("conv3.b", {kC3}, 0);
    fc1_w_ = params_.add("fc1.w", {kFc, kC3}, kC3);
    fc1_b_ = params_.add("fc1.b", {kFc}, 0);
    fc2_w_ = params_.add("fc2.w", {1, kFc}, kFc);
    fc2_b_ = params_.add("fc2.b", {1}, 0);
  }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // batch: B windows, each L x 4 row-major. Training mode normalizes with
  // batch statistics; call commit_running_stats() afterwards to fold them
  // into the running estimates.
  void forward(std::span<const double> batch, std::size_t b, std::size_t length, CnnWorkspace& ws,
               bool training) const {
    if (length < kMinLength)
      throw ShapeError("Cnn: window length " + std::to_string(length) + " < " + std::to_string(kMinLength));
    if (b == 0 || batch.size() != b * length * kInputChannels)
      throw ShapeError("Cnn: batch has " + std::to_string(batch.size()) + " values, expected B*L*4");
    if (!all_finite(batch)) throw NonFiniteError("Cnn: non-finite input");
    const std::size_t l1 = length, l2 = l1 / 2, l4 = l2 / 2;
    ws.batch = b;
    ws.length = length;
    ws.training = training;
    ws.x.resize(b * kInputChannels * l1);
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t t = 0; t < l1; ++t)
        for (std::size_t c = 0; c < kInputChannels; ++c)
          ws.x[(n * kInputChannels + c) * l1 + t] = batch[(n * l1 + t) * kInputChannels + c];

    const Conv1dShape s1{kInputChannels, kC1, 5, 2}, s2{kC1, kC2, 5, 2}, s3{kC2, kC3, 3, 1};
    conv_batch(ws.x, b, l1, c1_w_, c1_b_, s1, ws.z1);
    bn_forward(ws.z1, b, kC1, l1, bn1_, ws.bn1, training, ws.a1);
    maxpool2(ws.a1, b * kC1, l1, ws.p1, ws.p1_idx);
    conv_batch(ws.p1, b, l2, c2_w_, c2_b_, s2, ws.z2);
    bn_forward(ws.z2, b, kC2, l2, bn2_, ws.bn2, training, ws.a2);
    maxpool2(ws.a2, b * kC2, l2, ws.p2, ws.p2_idx);
    conv_batch(ws.p2, b, l4, c3_w_, c3_b_, s3, ws.z3);

    ws.pooled.assign(b * kC3, 0.0);
    for (std::size_t i = 0; i < b * kC3; ++i) {
      double s = 0.0;
      for (std::size_t t = 0; t < l4; ++t) s += ws.z3[i * l4 + t];
      ws.pooled[i] = s / static_cast<double>(l4);
    }
    ws.u.assign(b * kFc, 0.0);
    ws.logits.assign(b, 0.0);
    for (std::size_t n = 0; n < b; ++n) {
      double* u = ws.u.data() + n * kFc;
      std::copy(params_[fc1_b_].data.begin(), params_[fc1_b_].data.end(), u);
      gemv(params_[fc1_w_].ptr(), ws.pooled.data() + n * kC3, u, kFc, kC3);
      for (std::size_t j = 0; j < kFc; ++j) u[j] = u[j] > 0.0 ? u[j] : 0.0;
      ws.logits[n] = dot(params_[fc2_w_].ptr(), u, kFc) + params_[fc2_b_].data[0];
    }
    ws.has_forward = true;
  }

  // Folds the last training forward's batch statistics into the running
  // mean/var (momentum 0.1, unbiased variance as in common frameworks).
  void commit_running_stats(const CnnWorkspace& ws) {
    if (!ws.has_forward || !ws.training) return;
    const std::size_t l1 = ws.length, l2 = l1 / 2;
    update_running(bn1_, ws.bn1, ws.batch * l1);
    update_running(bn2_, ws.bn2, ws.batch * l2);
  }

  void backward(CnnWorkspace& ws, std::span<const double> d_logits, ParamSet& grads) const {
    if (!ws.has_forward) throw StateError("Cnn: backward called without a recorded forward pass");
    const std::size_t b = ws.batch, l1 = ws.length, l2 = l1 / 2, l4 = l2 / 2;
    if (d_logits.size() != b) throw ShapeError("Cnn: d_logits length must equal batch size");

    std::vector<double> d_pooled(b * kC3, 0.0);
    for (std::size_t n = 0; n < b; ++n) {
      const double g = d_logits[n];
      const double* u = ws.u.data() + n * kFc;
      axpy(g, u, grads[fc2_w_].ptr(), kFc);
      grads[fc2_b_].data[0] += g;
      std::vector<double> du(kFc);
      for (std::size_t j = 0; j < kFc; ++j) du[j] = u[j] > 0.0 ? g * params_[fc2_w_].data[j] : 0.0;
      for (std::size_t j = 0; j < kFc; ++j) {
        grads[fc1_b_].data[j] += du[j];
        axpy(du[j], ws.pooled.data() + n * kC3, grads[fc1_w_].ptr() + j * kC3, kC3);
      }
      gemv_t(params_[fc1_w_].ptr(), du.data(), d_pooled.data() + n * kC3, kFc, kC3);
    }

    std::vector<double> d_z3(b * kC3 * l4);
    for (std::size_t i = 0; i < b * kC3; ++i)
      for (std::size_t t = 0; t < l4; ++t) d_z3[i * l4 + t] = d_pooled[i] / static_cast<double>(l4);

    const Conv1dShape s1{kInputChannels, kC1, 5, 2}, s2{kC1, kC2, 5, 2}, s3{kC2, kC3, 3, 1};
    std::vector<double> d_p2(ws.p2.size(), 0.0);
    conv_batch_backward(ws.p2, b, l4, c3_w_, c3_b_, s3, d_z3, d_p2, grads);
    std::vector<double> d_a2(ws.a2.size(), 0.0);
    for (std::size_t i = 0; i < d_p2.size(); ++i) d_a2[ws.p2_idx[i]] += d_p2[i];
    std::vector<double> d_z2(ws.z2.size());
    bn_backward(ws.a2, d_a2, b, kC2, l2, bn2_, ws.bn2, ws.training, grads, d_z2);
    std::vector<double> d_p1(ws.p1.size(), 0.0);
    conv_batch_backward(ws.p1, b, l2, c2_w_, c2_b_, s2, d_z2, d_p1, grads);
    std::vector<double> d_a1(ws.a1.size(), 0.0);
    for (std::size_t i = 0; i < d_p1.size(); ++i) d_a1[ws.p1_idx[i]] += d_p1[i];
    std::vector<double> d_z1(ws.z1.size());
    bn_backward(ws.a1, d_a1, b, kC1, l1, bn1_, ws.bn1, ws.training, grads, d_z1);
    std::vector<double> unused;
    conv_batch_backward(ws.x, b, l1, c1_w_, c1_b_, s1, d_z1, unused, grads);
    ws.has_forward = false;
  }

 private:
  struct BnIndex {
    std::size_t gamma, beta, running_mean, running_var;
  };

  BnIndex add_bn(const std::string& prefix, std::size_t c) {
    return {params_.add(prefix + ".weight", {c}, 0, true, 1.0), params_.add(prefix + ".bias", {c}, 0),
            params_.add(prefix + ".running_mean", {c}, 0, false, 0.0),
            params_.add(prefix + ".running_var", {c}, 0, false, 1.0)};
  }

  void conv_batch(const std::vector<double>& in, std::size_t b, std::size_t length, std::size_t w, std::size_t bias,
                  const Conv1dShape& s, std::vector<double>& out) const {
    const std::size_t lout = s.out_length(length);
    out.resize(b * s.out_channels * lout);
    for (std::size_t n = 0; n < b; ++n)
      conv1d_forward<double>(std::span(in).subspan(n * s.in_channels * length, s.in_channels * length), length,
                             params_[w].span(), params_[bias].span(), s,
                             std::span(out).subspan(n * s.out_channels * lout, s.out_channels * lout));
  }

  void conv_batch_backward(const std::vector<double>& in, std::size_t b, std::size_t length, std::size_t w,
                           std::size_t bias, const Conv1dShape& s, const std::vector<double>& d_out,
                           std::vector<double>& d_in, ParamSet& grads) const {
    const std::size_t lout = s.out_length(length);
    for (std::size_t n = 0; n < b; ++n) {
      std::span<double> din;
      if (!d_in.empty()) din = std::span(d_in).subspan(n * s.in_channels * length, s.in_channels * length);
      conv1d_backward<double>(std::span(in).subspan(n * s.in_channels * length, s.in_channels * length), length,
                              params_[w].span(), s,
                              std::span(d_out).subspan(n * s.out_channels * lout, s.out_channels * lout), din,
                              grads[w].span(), grads[bias].span());
    }
  }

  // Normalizes z (B x C x L) per channel, then applies ReLU into `out`.
  void bn_forward(const std::vector<double>& z, std::size_t b, std::size_t c, std::size_t l, const BnIndex& bn,
                  BatchNormCache& cache, bool training, std::vector<double>& out) const {
    const double count = static_cast<double>(b * l);
    cache.xhat.resize(z.size());
    cache.inv_std.assign(c, 0.0);
    cache.mean.assign(c, 0.0);
    cache.var.assign(c, 0.0);
    out.resize(z.size());
    const auto& gamma = params_[bn.gamma].data;
    const auto& beta = params_[bn.beta].data;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double mean, var;
      if (training) {
        double s = 0.0;
        for (std::size_t n = 0; n < b; ++n)
          for (std::size_t t = 0; t < l; ++t) s += z[(n * c + ch) * l + t];
        mean = s / count;
        double ss = 0.0;
        for (std::size_t n = 0; n < b; ++n)
          for (std::size_t t = 0; t < l; ++t) {
            const double d = z[(n * c + ch) * l + t] - mean;
            ss += d * d;
          }
        var = ss / count;
      } else {
        mean = params_[bn.running_mean].data[ch];
        var = params_[bn.running_var].data[ch];
      }
      cache.mean[ch] = mean;
      cache.var[ch] = var;
      const double inv = 1.0 / std::sqrt(var + kBnEps);
      cache.inv_std[ch] = inv;
      for (std::size_t n = 0; n < b; ++n)
        for (std::size_t t = 0; t < l; ++t) {
          const std::size_t i = (n * c + ch) * l + t;
          cache.xhat[i] = (z[i] - mean) * inv;
          const double y = gamma[ch] * cache.xhat[i] + beta[ch];
          out[i] = y > 0.0 ? y : 0.0;
        }
    }
  }

  // d_out is the gradient w.r.t. the post-ReLU output `out`.
  void bn_backward(const std::vector<double>& out, const std::vector<double>& d_out, std::size_t b, std::size_t c,
                   std::size_t l, const BnIndex& bn, const BatchNormCache& cache, bool training, ParamSet& grads,
                   std::vector<double>& d_z) const {
    const double count = static_cast<double>(b * l);
    const auto& gamma = params_[bn.gamma].data;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t n = 0; n < b; ++n)
        for (std::size_t t = 0; t < l; ++t) {
          const std::size_t i = (n * c + ch) * l + t;
          const double dy = out[i] > 0.0 ? d_out[i] : 0.0;
          sum_dy += dy;
          sum_dy_xhat += dy * cache.xhat[i];
        }
      grads[bn.gamma].data[ch] += sum_dy_xhat;
      grads[bn.beta].data[ch] += sum_dy;
      const double g = gamma[ch];
      const double inv = cache.inv_std[ch];
      for (std::size_t n = 0; n < b; ++n)
        for (std::size_t t = 0; t < l; ++t) {
          const std::size_t i = (n * c + ch) * l + t;
          const double dy = out[i] > 0.0 ? d_out[i] : 0.0;
          if (training)
            d_z[i] = g * inv * (dy - sum_dy / count - cache.xhat[i] * sum_dy_xhat / count);
          else
            d_z[i] = g * inv * dy;
        }
    }
  }

  static void maxpool2(const std::vector<double>& in, std::size_t rows, std::size_t l, std::vector<double>& out,
                       std::vector<std::size_t>& idx) {
    const std::size_t lo = l / 2;
    out.resize(rows * lo);
    idx.resize(rows * lo);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t t = 0; t < lo; ++t) {
        const std::size_t a = r * l + 2 * t;
        const std::size_t pick = in[a + 1] > in[a] ? a + 1 : a;
        out[r * lo + t] = in[pick];
        idx[r * lo + t] = pick;
      }
  }

  void update_running(const BnIndex& bn, const BatchNormCache& cache, std::size_t count) {
    const double unbias = count > 1 ? static_cast<double>(count) / static_cast<double>(count - 1) : 1.0;
    auto& rm = params_[bn.running_mean].data;
    auto& rv = params_[bn.running_var].data;
    for (std::size_t ch = 0; ch < rm.size(); ++ch) {
      rm[ch] = (1.0 - kBnMomentum) * rm[ch] + kBnMomentum * cache.mean[ch];
      rv[ch] = (1.0 - kBnMomentum) * rv[ch] + kBnMomentum * cache.var[ch] * unbias;
    }
  }

  ParamSet params_;
  std::size_t c1_w_, c1_b_, c2_w_, c2_b_, c3_w_, c3_b_, fc1_w_, fc1_b_, fc2_w_, fc2_b_;
  BnIndex bn1_, bn2_;
};

}  // namespace footfall::nn

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "footfall/nn/kernels.hpp"

namespace footfall::nn {

// Views onto one direction of one LSTM layer. Pre-activations are laid out as
// four H-blocks in gate order i, f, g, o.
struct LstmWeights {
  const double* w_ih = nullptr;  // 4H x input
  const double* w_hh = nullptr;  // 4H x H
  const double* b_ih = nullptr;  // 4H
  const double* b_hh = nullptr;  // 4H
  std::size_t input = 0;
  std::size_t hidden = 0;
};

struct LstmGradients {
  double* w_ih = nullptr;
  double* w_hh = nullptr;
  double* b_ih = nullptr;
  double* b_hh = nullptr;
};

// One time step: c' = f*c + i*g, h' = o*tanh(c').
inline void lstm_cell(std::span<const double> x, std::span<const double> h, std::span<const double> c,
                      const LstmWeights& w, std::span<double> h_out, std::span<double> c_out) {
  const std::size_t hid = w.hidden;
  if (x.size() != w.input || h.size() != hid || c.size() != hid || h_out.size() != hid || c_out.size() != hid)
    throw ShapeError("lstm_cell: inconsistent vector sizes");
  std::vector<double> pre(4 * hid);
  for (std::size_t r = 0; r < 4 * hid; ++r) pre[r] = w.b_ih[r] + w.b_hh[r];
  gemv(w.w_ih, x.data(), pre.data(), 4 * hid, w.input);
  gemv(w.w_hh, h.data(), pre.data(), 4 * hid, hid);
  for (std::size_t j = 0; j < hid; ++j) {
    const double i = sigmoid(pre[j]);
    const double f = sigmoid(pre[hid + j]);
    const double g = std::tanh(pre[2 * hid + j]);
    const double o = sigmoid(pre[3 * hid + j]);
    c_out[j] = f * c[j] + i * g;
    h_out[j] = o * std::tanh(c_out[j]);
  }
}

// Recorded state for one direction over a sequence, indexed by time step.
struct LstmDirectionCache {
  std::vector<double> gates;   // W x 4H, activated i, f, g, o
  std::vector<double> c;       // W x H
  std::vector<double> tanh_c;  // W x H
  std::vector<double> h;       // W x H
  std::vector<double> pre;     // W x 4H: input projections, reused for d(pre) in backward
  std::vector<double> dh_rec;  // H
  std::vector<double> dc_rec;  // H
  std::vector<double> dh_tmp;  // H

  void ensure(std::size_t steps, std::size_t hidden) {
    auto fit = [](std::vector<double>& v, std::size_t n) {
      if (v.size() != n) v.assign(n, 0.0);
    };
    fit(gates, steps * 4 * hidden);
    fit(c, steps * hidden);
    fit(tanh_c, steps * hidden);
    fit(h, steps * hidden);
    fit(pre, steps * 4 * hidden);
    fit(dh_rec, hidden);
    fit(dc_rec, hidden);
    fit(dh_tmp, hidden);
  }
};

// Runs one direction over x (steps x input) from a zero state. `reverse`
// processes t = steps-1 .. 0. h_t is written to out[t * out_stride + out_offset].
inline void lstm_direction_forward(const double* x, std::size_t steps, const LstmWeights& w, bool reverse,
                                   LstmDirectionCache& cache, double* out, std::size_t out_stride,
                                   std::size_t out_offset) {
  const std::size_t hid = w.hidden;
  const std::size_t g4 = 4 * hid;
  cache.ensure(steps, hid);
  double* pre = cache.pre.data();
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t r = 0; r < g4; ++r) pre[t * g4 + r] = w.b_ih[r] + w.b_hh[r];
  gemm_nt(x, w.w_ih, pre, steps, g4, w.input);

  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t t = reverse ? steps - 1 - step : step;
    double* p = pre + t * g4;
    if (step > 0) {
      const std::size_t prev = reverse ? t + 1 : t - 1;
      gemv(w.w_hh, cache.h.data() + prev * hid, p, g4, hid);
    }
    double* gates = cache.gates.data() + t * g4;
    const double* c_prev = step > 0 ? cache.c.data() + (reverse ? t + 1 : t - 1) * hid : nullptr;
    double* c = cache.c.data() + t * hid;
    double* tc = cache.tanh_c.data() + t * hid;
    double* h = cache.h.data() + t * hid;
    std::copy(p, p + g4, gates);
    sigmoid_inplace(gates, 2 * hid);
    tanh_inplace(gates + 2 * hid, hid);
    sigmoid_inplace(gates + 3 * hid, hid);
    const double* ig = gates;
    const double* fg = gates + hid;
    const double* gg = gates + 2 * hid;
    const double* og = gates + 3 * hid;
    if (c_prev) {
#pragma omp simd
      for (std::size_t j = 0; j < hid; ++j) c[j] = fg[j] * c_prev[j] + ig[j] * gg[j];
    } else {
#pragma omp simd
      for (std::size_t j = 0; j < hid; ++j) c[j] = ig[j] * gg[j];
    }
    std::copy(c, c + hid, tc);
    tanh_inplace(tc, hid);
#pragma omp simd
    for (std::size_t j = 0; j < hid; ++j) h[j] = og[j] * tc[j];
    std::copy(h, h + hid, out + t * out_stride + out_offset);
  }
}

// Backpropagates d_out (same layout as the forward `out`) through one
// direction. Accumulates parameter gradients and, if d_x is non-null, the
// input gradient (steps x input).
inline void lstm_direction_backward(const double* x, std::size_t steps, const LstmWeights& w, bool reverse,
                                    LstmDirectionCache& cache, const double* d_out, std::size_t out_stride,
                                    std::size_t out_offset, const LstmGradients& grads, double* d_x) {
  const std::size_t hid = w.hidden;
  const std::size_t g4 = 4 * hid;
  double* dpre = cache.pre.data();  // input projections are no longer needed
  std::fill(cache.dh_rec.begin(), cache.dh_rec.end(), 0.0);
  std::fill(cache.dc_rec.begin(), cache.dc_rec.end(), 0.0);

  for (std::size_t back = 0; back < steps; ++back) {
    const std::size_t step = steps - 1 - back;
    const std::size_t t = reverse ? steps - 1 - step : step;
    const bool first = step == 0;
    const std::size_t prev = first ? 0 : (reverse ? t + 1 : t - 1);
    const double* gates = cache.gates.data() + t * g4;
    const double* tc = cache.tanh_c.data() + t * hid;
    const double* c_prev = first ? nullptr : cache.c.data() + prev * hid;
    const double* dout = d_out + t * out_stride + out_offset;
    double* dp = dpre + t * g4;
    for (std::size_t j = 0; j < hid; ++j) {
      const double i = gates[j], f = gates[hid + j], g = gates[2 * hid + j], o = gates[3 * hid + j];
      const double dh = dout[j] + cache.dh_rec[j];
      const double dc = cache.dc_rec[j] + dh * o * (1.0 - tc[j] * tc[j]);
      dp[j] = dc * g * i * (1.0 - i);
      dp[hid + j] = c_prev ? dc * c_prev[j] * f * (1.0 - f) : 0.0;
      dp[2 * hid + j] = dc * i * (1.0 - g * g);
      dp[3 * hid + j] = dh * tc[j] * o * (1.0 - o);
      cache.dc_rec[j] = dc * f;
    }
    std::fill(cache.dh_rec.begin(), cache.dh_rec.end(), 0.0);
    if (!first) gemv_t(w.w_hh, dp, cache.dh_rec.data(), g4, hid);
  }

  // dW_hh = sum_t dpre[t] (x) h[prev(t)]; prev(t) is t-1 (forward) or t+1
  // (reverse), so both operands are contiguous row ranges.
  if (steps > 1) {
    const double* dp_rows = reverse ? dpre : dpre + g4;
    const double* h_rows = reverse ? cache.h.data() + hid : cache.h.data();
    gemm_tn(dp_rows, h_rows, grads.w_hh, g4, hid, steps - 1);
  }

  for (std::size_t t = 0; t < steps; ++t) {
    const double* dp = dpre + t * g4;
    for (std::size_t r = 0; r < g4; ++r) {
      grads.b_ih[r] += dp[r];
      grads.b_hh[r] += dp[r];
    }
  }
  gemm_tn(dpre, x, grads.w_ih, g4, w.input, steps);
  if (d_x) gemm_nn(dpre, w.w_ih, d_x, steps, w.input, g4);
}

}  // namespace footfall::nn

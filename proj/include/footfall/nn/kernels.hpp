#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wignored-attributes"
#endif
#include <Eigen/Core>

#include "footfall/error.hpp"

// Dense kernels on row-major buffers. Accumulating variants (+=) let the
// backward passes sum contributions without temporaries.
namespace footfall::nn {

template <class T>
inline T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Eight fixed partial sums, so the summation order depends only on n and
// never on where the buffers happen to be aligned.
template <class T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  const std::size_t blocks = n / 8;
  for (std::size_t bi = 0; bi < blocks; ++bi)
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[8 * bi + j] * b[8 * bi + j];
  T tail = 0;
  for (std::size_t i = 8 * blocks; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <class T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <class T>
using VectorMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <class T>
using ConstVectorMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

// y[M] += A[M x K] * x[K]
template <class T>
inline void gemv(const T* a, const T* x, T* y, std::size_t m, std::size_t k) {
  VectorMap<T>(y, m).noalias() += ConstMatrixMap<T>(a, m, k) * ConstVectorMap<T>(x, k);
}

// y[K] += A[M x K]^T * x[M]
template <class T>
inline void gemv_t(const T* a, const T* x, T* y, std::size_t m, std::size_t k) {
  VectorMap<T>(y, k).noalias() += ConstMatrixMap<T>(a, m, k).transpose() * ConstVectorMap<T>(x, m);
}

// C[M x N] += A[M x K] * B[N x K]^T
template <class T>
inline void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  MatrixMap<T>(c, m, n).noalias() += ConstMatrixMap<T>(a, m, k) * ConstMatrixMap<T>(b, n, k).transpose();
}

// C[M x N] += A[K x M]^T * B[K x N]
template <class T>
inline void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  MatrixMap<T>(c, m, n).noalias() += ConstMatrixMap<T>(a, k, m).transpose() * ConstMatrixMap<T>(b, k, n);
}

// C[M x N] += A[M x K] * B[K x N]
template <class T>
inline void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  MatrixMap<T>(c, m, n).noalias() += ConstMatrixMap<T>(a, m, k) * ConstMatrixMap<T>(b, k, n);
}

// Applies a packet function over v[0..n) in full packets from index 0; the
// ragged tail goes through a padded packet. Every element therefore takes
// the same vector code path whatever the buffer's alignment (Eigen's own
// traversal peels scalar elements up to an aligned boundary, which makes
// results depend on the allocation address).
template <class T, class F>
inline void packet_map(T* v, std::size_t n, F&& f) {
  namespace ei = Eigen::internal;
  using P = typename ei::packet_traits<T>::type;
  constexpr std::size_t L = ei::unpacket_traits<P>::size;
  std::size_t i = 0;
  for (; i + L <= n; i += L) ei::pstoreu(v + i, f(ei::ploadu<P>(v + i)));
  if (i < n) {
    T tmp[L] = {};
    std::copy(v + i, v + n, tmp);
    ei::pstoreu(tmp, f(ei::ploadu<P>(tmp)));
    std::copy(tmp, tmp + (n - i), v + i);
  }
}

// Vectorized in-place activations. sigmoid(x) = 1 / (1 + exp(-x));
// tanh(x) = 2 / (1 + exp(-2x)) - 1.
template <class T>
inline void sigmoid_inplace(T* v, std::size_t n) {
  namespace ei = Eigen::internal;
  using P = typename ei::packet_traits<T>::type;
  const P one = ei::pset1<P>(T(1));
  packet_map(v, n, [&](const P& x) { return ei::pdiv(one, ei::padd(one, ei::pexp(ei::pnegate(x)))); });
}

template <class T>
inline void tanh_inplace(T* v, std::size_t n) {
  namespace ei = Eigen::internal;
  using P = typename ei::packet_traits<T>::type;
  const P one = ei::pset1<P>(T(1)), two = ei::pset1<P>(T(2)), mtwo = ei::pset1<P>(T(-2));
  packet_map(v, n, [&](const P& x) { return ei::psub(ei::pdiv(two, ei::padd(one, ei::pexp(ei::pmul(mtwo, x)))), one); });
}

struct Conv1dShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t padding = 0;

  std::size_t out_length(std::size_t length) const {
    const std::size_t padded = length + 2 * padding;
    if (padded < kernel)
      throw ShapeError("conv1d: input length " + std::to_string(length) + " too short for kernel " +
                       std::to_string(kernel));
    return padded - kernel + 1;
  }
};

// Cross-correlation with zero padding.
// input: C_in x L, weight: C_out x C_in x K, bias: C_out (or empty),
// output: C_out x L_out with L_out = L + 2*padding - K + 1.
template <class T>
void conv1d_forward(std::span<const T> input, std::size_t length, std::span<const T> weight, std::span<const T> bias,
                    const Conv1dShape& s, std::span<T> output) {
  if (length == 0) throw ShapeError("conv1d: length must be >= 1");
  if (input.size() != s.in_channels * length)
    throw ShapeError("conv1d: input has " + std::to_string(input.size()) + " values, expected C_in*L = " +
                     std::to_string(s.in_channels * length));
  if (weight.size() != s.out_channels * s.in_channels * s.kernel)
    throw ShapeError("conv1d: weight has " + std::to_string(weight.size()) + " values, expected C_out*C_in*K = " +
                     std::to_string(s.out_channels * s.in_channels * s.kernel));
  if (!bias.empty() && bias.size() != s.out_channels)
    throw ShapeError("conv1d: bias length " + std::to_string(bias.size()) + " != C_out " +
                     std::to_string(s.out_channels));
  const std::size_t lout = s.out_length(length);
  if (output.size() != s.out_channels * lout)
    throw ShapeError("conv1d: output buffer has " + std::to_string(output.size()) + " values, expected " +
                     std::to_string(s.out_channels * lout));

  for (std::size_t o = 0; o < s.out_channels; ++o) {
    T* out = output.data() + o * lout;
    std::fill(out, out + lout, bias.empty() ? T(0) : bias[o]);
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const T* in = input.data() + c * length;
      for (std::size_t k = 0; k < s.kernel; ++k) {
        const T w = weight[(o * s.in_channels + c) * s.kernel + k];
        // out[t] += w * in[t + k - padding] for in-range source indices.
        const std::size_t t0 = k < s.padding ? s.padding - k : 0;
        const std::size_t t1 = std::min(lout, length + s.padding - k);
        if (t1 <= t0) continue;
        axpy(w, in + (t0 + k - s.padding), out + t0, t1 - t0);
      }
    }
  }
}

// Accumulates gradients for conv1d_forward. d_input may be empty when the
// input gradient is not needed.
template <class T>
void conv1d_backward(std::span<const T> input, std::size_t length, std::span<const T> weight, const Conv1dShape& s,
                     std::span<const T> d_output, std::span<T> d_input, std::span<T> d_weight, std::span<T> d_bias) {
  const std::size_t lout = s.out_length(length);
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    const T* dout = d_output.data() + o * lout;
    if (!d_bias.empty()) {
      T sum = 0;
      for (std::size_t t = 0; t < lout; ++t) sum += dout[t];
      d_bias[o] += sum;
    }
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const T* in = input.data() + c * length;
      for (std::size_t k = 0; k < s.kernel; ++k) {
        const std::size_t t0 = k < s.padding ? s.padding - k : 0;
        const std::size_t t1 = std::min(lout, length + s.padding - k);
        if (t1 <= t0) continue;
        const std::size_t widx = (o * s.in_channels + c) * s.kernel + k;
        d_weight[widx] += dot(dout + t0, in + (t0 + k - s.padding), t1 - t0);
        if (!d_input.empty()) axpy(weight[widx], dout + t0, d_input.data() + c * length + (t0 + k - s.padding), t1 - t0);
      }
    }
  }
}

}  // namespace footfall::nn

#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic pop
#endif

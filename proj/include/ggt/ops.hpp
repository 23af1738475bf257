#pragma once

#include "ggt/tensor.hpp"

namespace ggt {

inline constexpr double kLayerNormEps = 1e-5;

// Forward kernels. All reductions accumulate in ascending index order, so
// results are bit-reproducible for a given build.

// c[i][j] = sum_t a[i][t] * b[t][j]
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

// Row-wise softmax with max subtraction. NaN input raises NumericError.
template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x);

// Normalizes over the last axis (biased variance), then gamma * xhat + beta.
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, double eps = kLayerNormEps);

// x[N x Cin] . w[Cin x Cout] (+ b[Cout]). `bias` may be null.
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>* bias);

// Exact-erf GELU: x * Phi(x).
template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x);

// Per-channel cross-correlation of x[C x h x w] with k[C x kh x kw], stride 1,
// zero "same" padding. Kernel extents must be odd.
template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& x, const BasicTensor<T>& k);

namespace kernels {

// Backward kernels; each accumulates (+=) into the supplied gradient buffers.

template <typename T>
void matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b, const BasicTensor<T>& g,
                     BasicTensor<T>* ga, BasicTensor<T>* gb);

template <typename T>
void softmax_rows_backward(const BasicTensor<T>& y, const BasicTensor<T>& g, BasicTensor<T>& gx);

template <typename T>
void layer_norm_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, double eps,
                         const BasicTensor<T>& g, BasicTensor<T>* gx, BasicTensor<T>* ggamma,
                         BasicTensor<T>* gbeta);

template <typename T>
void gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& g, BasicTensor<T>& gx);

template <typename T>
void depthwise_conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& k,
                               const BasicTensor<T>& g, BasicTensor<T>* gx, BasicTensor<T>* gk);

} // namespace kernels

} // namespace ggt

#pragma once

// Naive serial kernels. Not used on the training path; kept as the
// reference the blocked kernels are tested and benchmarked against.

#include <cstddef>

#include "rldsm/nn/kernels.hpp"

namespace rldsm::nn::reference {

using kernels::ConvGeometry;

template <typename T>
void gemm(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      T s = 0;
      for (std::size_t k = 0; k < K; ++k) s += A[i * K + k] * B[k * N + j];
      C[i * N + j] = s;
    }
}

/// Direct convolution. x: (N, C_in, H, W); w: (C_out, C_in, k, k); y: (N, C_out, Ho, Wo).
template <typename T>
void conv2d_forward(const ConvGeometry& g, std::size_t batch, const T* x, const T* w, T* y) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T s = 0;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_height) ||
                    ix >= static_cast<long>(g.in_width))
                  continue;
                s += x[((n * g.in_channels + c) * g.in_height + iy) * g.in_width + ix] *
                     w[((o * g.in_channels + c) * k + ky) * k + kx];
              }
          y[((n * g.out_channels + o) * oh + oy) * ow + ox] = s;
        }
}

/// Gradients of conv2d_forward. dx and dw are overwritten.
template <typename T>
void conv2d_backward(const ConvGeometry& g, std::size_t batch, const T* x, const T* w, const T* dy,
                     T* dx, T* dw) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  for (std::size_t i = 0; i < batch * g.in_channels * g.in_plane(); ++i) dx[i] = 0;
  for (std::size_t i = 0; i < g.out_channels * g.patch(); ++i) dw[i] = 0;
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T d = dy[((n * g.out_channels + o) * oh + oy) * ow + ox];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_height) ||
                    ix >= static_cast<long>(g.in_width))
                  continue;
                const std::size_t xi = ((n * g.in_channels + c) * g.in_height + iy) * g.in_width + ix;
                const std::size_t wi = ((o * g.in_channels + c) * k + ky) * k + kx;
                dx[xi] += d * w[wi];
                dw[wi] += d * x[xi];
              }
        }
}

/// y[n, o] = sum_i x[n, i] * w[o, i] + b[o]
template <typename T>
void linear_forward(std::size_t batch, std::size_t in, std::size_t out, const T* x, const T* w,
                    const T* b, T* y) {
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out; ++o) {
      T s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += x[n * in + i] * w[o * in + i];
      y[n * out + o] = s;
    }
}

}  // namespace rldsm::nn::reference

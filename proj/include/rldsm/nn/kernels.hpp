#pragma once

// Blocked, OpenMP-parallel kernels used by the network layers.
//
// Work is split over disjoint output tiles and every output element is
// reduced in a fixed order by a single thread, so results do not depend on
// the thread count. nn/reference.hpp holds the naive serial versions these
// are tested and benchmarked against.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace rldsm::nn::kernels {

/// Convolution geometry over square kernels. Activations use a
/// channel-major (C, N, H, W) layout so each channel is one contiguous row.
struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 5;
  std::size_t stride = 2;
  std::size_t padding = 2;

  std::size_t out_height() const { return (in_height + 2 * padding - kernel) / stride + 1; }
  std::size_t out_width() const { return (in_width + 2 * padding - kernel) / stride + 1; }
  std::size_t patch() const { return in_channels * kernel * kernel; }
  std::size_t in_plane() const { return in_height * in_width; }
  std::size_t out_plane() const { return out_height() * out_width(); }
  bool valid() const {
    return kernel > 0 && stride > 0 && in_height + 2 * padding >= kernel &&
           in_width + 2 * padding >= kernel;
  }
  bool operator==(const ConvGeometry&) const = default;
};

namespace detail {

inline constexpr std::size_t kParallelWork = std::size_t{1} << 15;
inline constexpr std::size_t kRowTile = 4;
inline constexpr std::size_t kVecBytes = 64;
inline constexpr std::size_t kVecsPerRow = 4;

template <typename T>
struct Lanes {
  typedef T type __attribute__((vector_size(kVecBytes)));
  static constexpr std::size_t width = kVecBytes / sizeof(T);
};

template <typename T>
inline constexpr std::size_t col_tile = kVecsPerRow * Lanes<T>::width;

template <typename T>
inline typename Lanes<T>::type load(const T* p) {
  typename Lanes<T>::type v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

template <typename T>
inline void store(T* p, typename Lanes<T>::type v) {
  std::memcpy(p, &v, sizeof v);
}

// 4 x (4 vectors) register tile; the k loop runs in order for every
// element. Accumulators are spelled out so they stay in registers.
template <typename T>
inline void tile_full(std::size_t K, const T* A, std::size_t lda, const T* B, std::size_t ldb,
                      T* C, std::size_t ldc, bool accumulate) {
  using V = typename Lanes<T>::type;
  constexpr std::size_t W = Lanes<T>::width;
  static_assert(kRowTile == 4 && kVecsPerRow == 4);
  V c00{}, c01{}, c02{}, c03{}, c10{}, c11{}, c12{}, c13{};
  V c20{}, c21{}, c22{}, c23{}, c30{}, c31{}, c32{}, c33{};
  if (accumulate) {
    c00 = load(C), c01 = load(C + W), c02 = load(C + 2 * W), c03 = load(C + 3 * W);
    const T* r1 = C + ldc;
    c10 = load(r1), c11 = load(r1 + W), c12 = load(r1 + 2 * W), c13 = load(r1 + 3 * W);
    const T* r2 = C + 2 * ldc;
    c20 = load(r2), c21 = load(r2 + W), c22 = load(r2 + 2 * W), c23 = load(r2 + 3 * W);
    const T* r3 = C + 3 * ldc;
    c30 = load(r3), c31 = load(r3 + W), c32 = load(r3 + 2 * W), c33 = load(r3 + 3 * W);
  }
  const T* a0 = A;
  const T* a1 = A + lda;
  const T* a2 = A + 2 * lda;
  const T* a3 = A + 3 * lda;
  for (std::size_t k = 0; k < K; ++k) {
    const T* b = B + k * ldb;
    const V b0 = load(b), b1 = load(b + W), b2 = load(b + 2 * W), b3 = load(b + 3 * W);
    T a = a0[k];
    c00 += a * b0, c01 += a * b1, c02 += a * b2, c03 += a * b3;
    a = a1[k];
    c10 += a * b0, c11 += a * b1, c12 += a * b2, c13 += a * b3;
    a = a2[k];
    c20 += a * b0, c21 += a * b1, c22 += a * b2, c23 += a * b3;
    a = a3[k];
    c30 += a * b0, c31 += a * b1, c32 += a * b2, c33 += a * b3;
  }
  store(C, c00), store(C + W, c01), store(C + 2 * W, c02), store(C + 3 * W, c03);
  T* r1 = C + ldc;
  store(r1, c10), store(r1 + W, c11), store(r1 + 2 * W, c12), store(r1 + 3 * W, c13);
  T* r2 = C + 2 * ldc;
  store(r2, c20), store(r2 + W, c21), store(r2 + 2 * W, c22), store(r2 + 3 * W, c23);
  T* r3 = C + 3 * ldc;
  store(r3, c30), store(r3 + W, c31), store(r3 + 2 * W, c32), store(r3 + 3 * W, c33);
}

template <typename T>
inline void tile_edge(std::size_t rows, std::size_t cols, std::size_t K, const T* A,
                      std::size_t lda, const T* B, std::size_t ldb, T* C, std::size_t ldc,
                      bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* c = C + r * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < cols; ++j) c[j] = T(0);
    for (std::size_t k = 0; k < K; ++k) {
      const T a = A[r * lda + k];
      const T* b = B + k * ldb;
#pragma omp simd
      for (std::size_t j = 0; j < cols; ++j) c[j] += a * b[j];
    }
  }
}

}  // namespace detail

/// C[M x N] = A[M x K] * B[K x N] (or += when `accumulate`). Row-major with
/// explicit leading dimensions.
template <typename T>
void gemm(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
          std::size_t ldb, T* C, std::size_t ldc, bool accumulate) {
  using namespace detail;
  constexpr std::size_t kColTile = col_tile<T>;
  const std::size_t row_tiles = (M + kRowTile - 1) / kRowTile;
  const std::size_t col_tiles = (N + kColTile - 1) / kColTile;
  const long tiles = static_cast<long>(row_tiles * col_tiles);
#pragma omp parallel for schedule(static) if (M * N * K > kParallelWork)
  for (long t = 0; t < tiles; ++t) {
    // Column panel outermost so a panel of B stays cached across row tiles.
    const std::size_t j0 = static_cast<std::size_t>(t) / row_tiles * kColTile;
    const std::size_t i0 = static_cast<std::size_t>(t) % row_tiles * kRowTile;
    const std::size_t rows = std::min(kRowTile, M - i0);
    const std::size_t cols = std::min(kColTile, N - j0);
    const T* a = A + i0 * lda;
    const T* b = B + j0;
    T* c = C + i0 * ldc + j0;
    if (rows == kRowTile && cols == kColTile)
      tile_full(K, a, lda, b, ldb, c, ldc, accumulate);
    else
      tile_edge(rows, cols, K, a, lda, b, ldb, c, ldc, accumulate);
  }
}

namespace detail {

template <typename T>
inline T hsum(typename Lanes<T>::type v) {
  T s = 0;
  for (std::size_t i = 0; i < Lanes<T>::width; ++i) s += v[i];
  return s;
}

// 4 x 4 block of dot products over K; lanes are reduced in a fixed order.
template <typename T>
inline void dot_tile(std::size_t rows, std::size_t cols, std::size_t K, const T* A,
                     std::size_t lda, const T* B, std::size_t ldb, T* C, std::size_t ldc,
                     bool accumulate) {
  using V = typename Lanes<T>::type;
  constexpr std::size_t W = Lanes<T>::width;
  V acc[4][4] = {};
  const std::size_t kv = K / W * W;
  if (rows == 4 && cols == 4) {
    V c00{}, c01{}, c02{}, c03{}, c10{}, c11{}, c12{}, c13{};
    V c20{}, c21{}, c22{}, c23{}, c30{}, c31{}, c32{}, c33{};
    for (std::size_t k = 0; k < kv; k += W) {
      const V b0 = load(B + k), b1 = load(B + ldb + k), b2 = load(B + 2 * ldb + k),
              b3 = load(B + 3 * ldb + k);
      V a = load(A + k);
      c00 += a * b0, c01 += a * b1, c02 += a * b2, c03 += a * b3;
      a = load(A + lda + k);
      c10 += a * b0, c11 += a * b1, c12 += a * b2, c13 += a * b3;
      a = load(A + 2 * lda + k);
      c20 += a * b0, c21 += a * b1, c22 += a * b2, c23 += a * b3;
      a = load(A + 3 * lda + k);
      c30 += a * b0, c31 += a * b1, c32 += a * b2, c33 += a * b3;
    }
    acc[0][0] = c00, acc[0][1] = c01, acc[0][2] = c02, acc[0][3] = c03;
    acc[1][0] = c10, acc[1][1] = c11, acc[1][2] = c12, acc[1][3] = c13;
    acc[2][0] = c20, acc[2][1] = c21, acc[2][2] = c22, acc[2][3] = c23;
    acc[3][0] = c30, acc[3][1] = c31, acc[3][2] = c32, acc[3][3] = c33;
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t k = 0; k < kv; k += W)
          acc[r][c] += load(A + r * lda + k) * load(B + c * ldb + k);
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      T s = hsum<T>(acc[r][c]);
      for (std::size_t k = kv; k < K; ++k) s += A[r * lda + k] * B[c * ldb + k];
      C[r * ldc + c] = accumulate ? C[r * ldc + c] + s : s;
    }
}

}  // namespace detail

/// C[M x N] = A[M x K] * B[N x K]^T (or += when `accumulate`). Both inputs
/// are read along contiguous K.
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
             const T* B, std::size_t ldb, T* C, std::size_t ldc, bool accumulate) {
  const std::size_t row_tiles = (M + 3) / 4, col_tiles = (N + 3) / 4;
  const long tiles = static_cast<long>(row_tiles * col_tiles);
#pragma omp parallel for schedule(static) if (M * N * K > detail::kParallelWork)
  for (long t = 0; t < tiles; ++t) {
    const std::size_t i0 = static_cast<std::size_t>(t) / col_tiles * 4;
    const std::size_t j0 = static_cast<std::size_t>(t) % col_tiles * 4;
    detail::dot_tile(std::min<std::size_t>(4, M - i0), std::min<std::size_t>(4, N - j0), K,
                     A + i0 * lda, lda, B + j0 * ldb, ldb, C + i0 * ldc + j0, ldc, accumulate);
  }
}

/// dst[cols x rows] = transpose(src[rows x cols]).
template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t B = 32;
  const long row_blocks = static_cast<long>((rows + B - 1) / B);
#pragma omp parallel for schedule(static) if (rows * cols > kernels::detail::kParallelWork)
  for (long rb = 0; rb < row_blocks; ++rb) {
    const std::size_t r0 = static_cast<std::size_t>(rb) * B;
    const std::size_t r1 = std::min(rows, r0 + B);
    for (std::size_t c0 = 0; c0 < cols; c0 += B) {
      const std::size_t c1 = std::min(cols, c0 + B);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

namespace detail {

// Offset of every output position's window origin inside a padded plane.
inline const std::vector<std::size_t>& window_offsets(const ConvGeometry& g) {
  thread_local ConvGeometry cached{};
  thread_local std::vector<std::size_t> offs;
  if (offs.empty() || !(cached == g)) {
    const std::size_t pw = g.in_width + 2 * g.padding;
    offs.clear();
    for (std::size_t y = 0; y < g.out_height(); ++y)
      for (std::size_t x = 0; x < g.out_width(); ++x)
        offs.push_back(y * g.stride * pw + x * g.stride);
    cached = g;
  }
  return offs;
}

template <typename T>
std::vector<T>& padded_scratch() {
  thread_local std::vector<T> buf;
  return buf;
}

}  // namespace detail

/// Unfolds src (C, N, H, W) into col[patch x (N * out_plane)], zero-padded.
template <typename T>
void im2col(const ConvGeometry& g, std::size_t batch, const T* src, T* col) {
  const std::size_t k = g.kernel, pad = g.padding, op = g.out_plane();
  const std::size_t ph = g.in_height + 2 * pad, pw = g.in_width + 2 * pad;
  const std::size_t planes = g.in_channels * batch;
  const std::size_t row_len = batch * op;

  auto& padded = detail::padded_scratch<T>();
  padded.assign(planes * ph * pw, T(0));
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < g.in_height; ++y)
      std::copy_n(src + (p * g.in_height + y) * g.in_width, g.in_width,
                  padded.data() + (p * ph + y + pad) * pw + pad);

  const std::size_t* offs = detail::window_offsets(g).data();
  const T* base = padded.data();
  const long rows = static_cast<long>(g.patch());
#pragma omp parallel for schedule(static) if (g.patch() * row_len > detail::kParallelWork)
  for (long row = 0; row < rows; ++row) {
    const std::size_t c = static_cast<std::size_t>(row) / (k * k);
    const std::size_t ky = static_cast<std::size_t>(row) / k % k;
    const std::size_t kx = static_cast<std::size_t>(row) % k;
    T* out = col + static_cast<std::size_t>(row) * row_len;
    for (std::size_t n = 0; n < batch; ++n, out += op) {
      const T* in = base + (c * batch + n) * ph * pw + ky * pw + kx;
      for (std::size_t i = 0; i < op; ++i) out[i] = in[offs[i]];
    }
  }
}

/// Folds col back onto dst (C, N, H, W), overwriting dst. Each channel is
/// owned by one thread and its patch rows are summed in order.
template <typename T>
void col2im(const ConvGeometry& g, std::size_t batch, const T* col, T* dst) {
  const std::size_t k = g.kernel, pad = g.padding, op = g.out_plane();
  const std::size_t ph = g.in_height + 2 * pad, pw = g.in_width + 2 * pad;
  const std::size_t row_len = batch * op;

  auto& padded = detail::padded_scratch<T>();
  padded.assign(g.in_channels * batch * ph * pw, T(0));
  const std::size_t* offs = detail::window_offsets(g).data();
  const long channels = static_cast<long>(g.in_channels);
#pragma omp parallel for schedule(static) if (g.patch() * row_len > detail::kParallelWork)
  for (long cl = 0; cl < channels; ++cl) {
    const std::size_t c = static_cast<std::size_t>(cl);
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* in = col + ((c * k + ky) * k + kx) * row_len;
        for (std::size_t n = 0; n < batch; ++n, in += op) {
          T* out = padded.data() + (c * batch + n) * ph * pw + ky * pw + kx;
          for (std::size_t i = 0; i < op; ++i) out[offs[i]] += in[i];
        }
      }
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t y = 0; y < g.in_height; ++y)
        std::copy_n(padded.data() + ((c * batch + n) * ph + y + pad) * pw + pad, g.in_width,
                    dst + ((c * batch + n) * g.in_height + y) * g.in_width);
  }
}

}  // namespace rldsm::nn::kernels

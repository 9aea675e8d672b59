#include <doctest.h>

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rldsm/nn/kernels.hpp"
#include "rldsm/nn/layers.hpp"
#include "rldsm/nn/reference.hpp"
#include "rldsm/rng.hpp"

using namespace rldsm;
using namespace rldsm::nn;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, Rng& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

// (N, C, H, W) <-> (C, N, H, W)
template <typename T>
std::vector<T> swap_leading(const std::vector<T>& v, std::size_t a, std::size_t b,
                            std::size_t plane) {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      std::copy_n(v.data() + (i * b + j) * plane, plane, out.data() + (j * a + i) * plane);
  return out;
}

}  // namespace

TEST_CASE_TEMPLATE("gemm matches the naive product", T, float, double) {
  Rng rng(1);
  const double tol = sizeof(T) == 4 ? 1e-4 : 1e-12;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t M = 1 + rng.below(70), N = 1 + rng.below(90), K = 1 + rng.below(130);
    const auto A = random_vec<T>(M * K, rng), B = random_vec<T>(K * N, rng);
    std::vector<T> want(M * N), got(M * N, T(7));
    reference::gemm(M, N, K, A.data(), B.data(), want.data());
    kernels::gemm(M, N, K, A.data(), K, B.data(), N, got.data(), N, false);
    CHECK(max_abs_diff(want, got) < tol * K);

    // accumulate adds onto what is there
    std::vector<T> acc(M * N, T(1));
    kernels::gemm(M, N, K, A.data(), K, B.data(), N, acc.data(), N, true);
    for (auto& x : acc) x -= T(1);
    CHECK(max_abs_diff(want, acc) < tol * K);

    // A * B^T with B stored as (N x K)
    std::vector<T> Bt(N * K);
    kernels::transpose(K, N, B.data(), Bt.data());
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t n = 0; n < N; ++n) REQUIRE(Bt[n * K + k] == B[k * N + n]);
    std::vector<T> nt(M * N);
    kernels::gemm_nt(M, N, K, A.data(), K, Bt.data(), K, nt.data(), N, false);
    CHECK(max_abs_diff(want, nt) < tol * K);
  }
}

TEST_CASE_TEMPLATE("convolution layer matches direct convolution", T, float, double) {
  Rng rng(2);
  const double tol = sizeof(T) == 4 ? 1e-4 : 1e-12;
  for (int trial = 0; trial < 20; ++trial) {
    kernels::ConvGeometry g;
    g.in_channels = 1 + rng.below(4);
    g.out_channels = 1 + rng.below(5);
    g.in_height = 5 + rng.below(20);
    g.in_width = 5 + rng.below(20);
    g.kernel = 1 + 2 * rng.below(3);
    g.stride = 1 + rng.below(2);
    g.padding = rng.below(3);
    const std::size_t batch = 1 + rng.below(5);

    Conv2d<T> conv(g, "c");
    for (std::size_t i = 0; i < conv.weight.value.size(); ++i)
      conv.weight.value[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
    const auto x_nchw = random_vec<T>(batch * g.in_channels * g.in_plane(), rng);
    const auto dy_nchw = random_vec<T>(batch * g.out_channels * g.out_plane(), rng);

    std::vector<T> y_ref(dy_nchw.size()), dx_ref(x_nchw.size()), dw_ref(conv.weight.value.size());
    reference::conv2d_forward(g, batch, x_nchw.data(), conv.weight.value.data(), y_ref.data());
    reference::conv2d_backward(g, batch, x_nchw.data(), conv.weight.value.data(), dy_nchw.data(),
                               dx_ref.data(), dw_ref.data());

    BasicTensor<T> x({g.in_channels, batch, g.in_height, g.in_width},
                     swap_leading(x_nchw, batch, g.in_channels, g.in_plane()));
    const auto y = conv.forward(x, true);
    const std::vector<T> y_vec(y.data(), y.data() + y.size());
    CHECK(max_abs_diff(swap_leading(y_vec, g.out_channels, batch, g.out_plane()), y_ref) < tol * 100);

    BasicTensor<T> dy({g.out_channels, batch, g.out_height(), g.out_width()},
                      swap_leading(dy_nchw, batch, g.out_channels, g.out_plane()));
    const auto dx = conv.backward(dy, true);
    const std::vector<T> dx_vec(dx.data(), dx.data() + dx.size());
    CHECK(max_abs_diff(swap_leading(dx_vec, g.in_channels, batch, g.in_plane()), dx_ref) <
          tol * 100);
    const std::vector<T> dw(conv.weight.grad.data(), conv.weight.grad.data() + conv.weight.grad.size());
    CHECK(max_abs_diff(dw, dw_ref) < tol * 1000);
  }
}

TEST_CASE("linear layer matches the naive product") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t batch = 1 + rng.below(40), in = 1 + rng.below(300), out = 1 + rng.below(200);
    Linear<double> fc(in, out, "fc");
    for (std::size_t i = 0; i < fc.weight.value.size(); ++i) fc.weight.value[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < out; ++i) fc.bias.value[i] = rng.uniform(-1, 1);
    const auto xv = random_vec<double>(batch * in, rng);
    std::vector<double> want(batch * out);
    reference::linear_forward(batch, in, out, xv.data(), fc.weight.value.data(),
                              fc.bias.value.data(), want.data());
    const auto y = fc.forward(BasicTensor<double>({batch, in}, xv), false);
    CHECK(max_abs_diff(std::vector<double>(y.data(), y.data() + y.size()), want) < 1e-12 * in);
  }
}

TEST_CASE("im2col and col2im are adjoint") {
  // <im2col(x), c> == <x, col2im(c)> for any x and c
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    kernels::ConvGeometry g;
    g.in_channels = 1 + rng.below(3);
    g.out_channels = 1;
    g.in_height = 3 + rng.below(15);
    g.in_width = 3 + rng.below(15);
    g.kernel = 1 + 2 * rng.below(3);
    g.stride = 1 + rng.below(3);
    g.padding = rng.below(3);
    if (!g.valid()) continue;
    const std::size_t batch = 1 + rng.below(3);
    const auto x = random_vec<double>(g.in_channels * batch * g.in_plane(), rng);
    const auto c = random_vec<double>(g.patch() * batch * g.out_plane(), rng);
    std::vector<double> col(c.size()), back(x.size());
    kernels::im2col(g, batch, x.data(), col.data());
    kernels::col2im(g, batch, c.data(), back.data());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) lhs += col[i] * c[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

#ifdef _OPENMP
TEST_CASE("results do not depend on the thread count") {
  Rng rng(5);
  const std::size_t M = 64, N = 300, K = 800;
  const auto A = random_vec<float>(M * K, rng), B = random_vec<float>(K * N, rng);
  std::vector<float> one(M * N), many(M * N), nt_one(M * M), nt_many(M * M);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  kernels::gemm(M, N, K, A.data(), K, B.data(), N, one.data(), N, false);
  kernels::gemm_nt(M, M, K, A.data(), K, A.data(), K, nt_one.data(), M, false);
  omp_set_num_threads(4);
  kernels::gemm(M, N, K, A.data(), K, B.data(), N, many.data(), N, false);
  kernels::gemm_nt(M, M, K, A.data(), K, A.data(), K, nt_many.data(), M, false);
  omp_set_num_threads(saved);
  CHECK(one == many);
  CHECK(nt_one == nt_many);
}
#endif

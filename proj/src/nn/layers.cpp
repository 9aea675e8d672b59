#include "rldsm/nn/layers.hpp"

#include <cmath>

namespace rldsm::nn {

template <typename T>
void he_uniform(BasicTensor<T>& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const kernels::ConvGeometry& geometry, std::string name)
    : weight(std::move(name), {geometry.out_channels, geometry.patch()}), geometry_(geometry) {
  if (!geometry.valid()) throw ShapeError("convolution kernel larger than padded input");
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& x, bool cache) {
  const auto& g = geometry_;
  if (x.rank() != 4 || x.dim(0) != g.in_channels || x.dim(2) != g.in_height ||
      x.dim(3) != g.in_width)
    throw ShapeError("conv input: expected (" + std::to_string(g.in_channels) + ", N, " +
                     std::to_string(g.in_height) + ", " + std::to_string(g.in_width) +
                     "), got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(1);
  const std::size_t cols = batch * g.out_plane();
  std::vector<T>& col = cache ? col_ : scratch_;
  col.resize(g.patch() * cols);
  kernels::im2col(g, batch, x.data(), col.data());
  BasicTensor<T> y({g.out_channels, batch, g.out_height(), g.out_width()});
  kernels::gemm(g.out_channels, cols, g.patch(), weight.value.data(), g.patch(), col.data(), cols,
                y.data(), cols, false);
  if (cache) batch_ = batch;
  return y;
}

template <typename T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& dy, bool need_input_grad) {
  const auto& g = geometry_;
  require_shape(dy.shape(), {g.out_channels, batch_, g.out_height(), g.out_width()}, "conv dy");
  const std::size_t cols = batch_ * g.out_plane();

  // dW += dy * col^T
  kernels::gemm_nt(g.out_channels, g.patch(), cols, dy.data(), cols, col_.data(), cols,
                   weight.grad.data(), g.patch(), true);
  if (!need_input_grad) return {};

  // dcol = W^T * dy, folded back onto the input layout.
  w_t_.resize(weight.value.size());
  kernels::transpose(g.out_channels, g.patch(), weight.value.data(), w_t_.data());
  scratch_.resize(g.patch() * cols);
  kernels::gemm(g.patch(), cols, g.out_channels, w_t_.data(), g.out_channels, dy.data(), cols,
                scratch_.data(), cols, false);
  BasicTensor<T> dx({g.in_channels, batch_, g.in_height, g.in_width});
  kernels::col2im(g, batch_, scratch_.data(), dx.data());
  return dx;
}

// ------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels, std::string name)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean({channels}, T(0)),
      running_var({channels}, T(1)) {
  gamma.value.fill(T(1));
}

template <typename T>
BasicTensor<T> BatchNorm<T>::forward(const BasicTensor<T>& x, Mode mode, bool cache) {
  const std::size_t channels = gamma.value.size();
  if (x.rank() < 2 || x.dim(0) != channels)
    throw ShapeError("batch norm input: expected " + std::to_string(channels) +
                     " leading channels, got " + shape_string(x.shape()));
  const std::size_t len = x.size() / channels;
  BasicTensor<T> y(x.shape());

  if (mode == Mode::Inference) {
    for (std::size_t c = 0; c < channels; ++c) {
      const T scale = gamma.value[c] / std::sqrt(running_var[c] + eps);
      const T shift = beta.value[c] - running_mean[c] * scale;
      const T* in = x.data() + c * len;
      T* out = y.data() + c * len;
      for (std::size_t i = 0; i < len; ++i) out[i] = in[i] * scale + shift;
    }
    return y;
  }

  if (len < 2) throw ShapeError("batch norm training needs at least two values per channel");
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* in = x.data() + c * len;
    double mean = 0.0;
    for (std::size_t i = 0; i < len; ++i) mean += in[i];
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t i = 0; i < len; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<double>(len);
    const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    inv_std[c] = istd;
    T* xh = xhat.data() + c * len;
    T* out = y.data() + c * len;
    const T m = static_cast<T>(mean);
    for (std::size_t i = 0; i < len; ++i) {
      xh[i] = (in[i] - m) * istd;
      out[i] = gamma.value[c] * xh[i] + beta.value[c];
    }
    if (cache) {
      const double unbiased = var * static_cast<double>(len) / static_cast<double>(len - 1);
      running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * m;
      running_var[c] = (T(1) - momentum) * running_var[c] + momentum * static_cast<T>(unbiased);
    }
  }
  if (cache) {
    xhat_ = std::move(xhat);
    inv_std_ = std::move(inv_std);
    per_channel_ = len;
  }
  return y;
}

template <typename T>
BasicTensor<T> BatchNorm<T>::backward(const BasicTensor<T>& dy) {
  const std::size_t channels = gamma.value.size();
  const std::size_t len = per_channel_;
  if (dy.size() != channels * len || xhat_.size() != dy.size())
    throw ShapeError("batch norm backward without a matching training forward");
  BasicTensor<T> dx(dy.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const T* d = dy.data() + c * len;
    const T* xh = xhat_.data() + c * len;
    double sum_d = 0.0, sum_dx = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      sum_d += d[i];
      sum_dx += static_cast<double>(d[i]) * xh[i];
    }
    gamma.grad[c] += static_cast<T>(sum_dx);
    beta.grad[c] += static_cast<T>(sum_d);
    const T k = gamma.value[c] * inv_std_[c] / static_cast<T>(len);
    const T mean_d = static_cast<T>(sum_d);
    const T mean_dx = static_cast<T>(sum_dx);
    T* out = dx.data() + c * len;
    for (std::size_t i = 0; i < len; ++i)
      out[i] = k * (static_cast<T>(len) * d[i] - mean_d - xh[i] * mean_dx);
  }
  return dx;
}

// ------------------------------------------------------------------ Relu

template <typename T>
BasicTensor<T> Relu<T>::forward(const BasicTensor<T>& x, bool cache) {
  BasicTensor<T> y(x.shape());
  if (cache) mask_.assign(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool on = x[i] > T(0);
    y[i] = on ? x[i] : T(0);
    if (cache) mask_[i] = on;
  }
  return y;
}

template <typename T>
BasicTensor<T> Relu<T>::backward(const BasicTensor<T>& dy) const {
  if (dy.size() != mask_.size()) throw ShapeError("relu backward without a matching forward");
  BasicTensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = mask_[i] ? dy[i] : T(0);
  return dx;
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, std::string name)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}) {}

template <typename T>
BasicTensor<T> Linear<T>::forward(const BasicTensor<T>& x, bool cache) {
  const std::size_t in = in_features(), out = out_features();
  if (x.rank() != 2 || x.dim(1) != in)
    throw ShapeError("linear input: expected (N, " + std::to_string(in) + "), got " +
                     shape_string(x.shape()));
  const std::size_t batch = x.dim(0);
  BasicTensor<T> y({batch, out});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out; ++o) y[n * out + o] = bias.value[o];
  kernels::gemm_nt(batch, out, in, x.data(), in, weight.value.data(), in, y.data(), out, true);
  if (cache) input_ = x;
  return y;
}

template <typename T>
BasicTensor<T> Linear<T>::backward(const BasicTensor<T>& dy, bool need_input_grad) {
  const std::size_t in = in_features(), out = out_features();
  const std::size_t batch = input_.empty() ? 0 : input_.dim(0);
  require_shape(dy.shape(), {batch, out}, "linear dy");

  std::vector<T> dy_t(batch * out);
  kernels::transpose(batch, out, dy.data(), dy_t.data());
  kernels::gemm(out, in, batch, dy_t.data(), batch, input_.data(), in, weight.grad.data(), in,
                true);
  for (std::size_t o = 0; o < out; ++o) {
    T s = 0;
    for (std::size_t n = 0; n < batch; ++n) s += dy_t[o * batch + n];
    bias.grad[o] += s;
  }
  if (!need_input_grad) return {};
  BasicTensor<T> dx({batch, in});
  kernels::gemm(batch, in, out, dy.data(), out, weight.value.data(), in, dx.data(), in, false);
  return dx;
}

#define RLDSM_INSTANTIATE(T)                                                 \
  template void he_uniform<T>(BasicTensor<T>&, std::size_t, Rng&);          \
  template class Conv2d<T>;                                                  \
  template class BatchNorm<T>;                                               \
  template class Relu<T>;                                                    \
  template class Linear<T>;

RLDSM_INSTANTIATE(float)
RLDSM_INSTANTIATE(double)

#undef RLDSM_INSTANTIATE

}  // namespace rldsm::nn

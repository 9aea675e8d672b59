#pragma once

#include <string>
#include <vector>

#include "rldsm/nn/kernels.hpp"
#include "rldsm/nn/tensor.hpp"
#include "rldsm/rng.hpp"

namespace rldsm::nn {

enum class Mode { Training, Inference };

template <typename T>
struct Param {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;

  Param() = default;
  Param(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}
};

/// He-uniform fill: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
template <typename T>
void he_uniform(BasicTensor<T>& t, std::size_t fan_in, Rng& rng);

/// 2-D convolution without bias over (C, N, H, W) activations.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const kernels::ConvGeometry& geometry, std::string name);

  /// x: (C_in, N, H, W) -> (C_out, N, H_out, W_out).
  BasicTensor<T> forward(const BasicTensor<T>& x, bool cache);
  /// Accumulates the weight gradient; returns dx when requested (else empty).
  BasicTensor<T> backward(const BasicTensor<T>& dy, bool need_input_grad);

  const kernels::ConvGeometry& geometry() const { return geometry_; }

  Param<T> weight;  // (C_out, C_in * k * k)

 private:
  kernels::ConvGeometry geometry_;
  std::size_t batch_ = 0;
  std::vector<T> col_;
  std::vector<T> scratch_;
  std::vector<T> w_t_;
};

/// Batch normalisation over (C, ...) activations; statistics per channel
/// across every trailing element.
template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::size_t channels, std::string name);

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, bool cache);
  BasicTensor<T> backward(const BasicTensor<T>& dy);

  Param<T> gamma;
  Param<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

 private:
  std::vector<T> xhat_;
  std::vector<T> inv_std_;
  std::size_t per_channel_ = 0;
};

template <typename T>
class Relu {
 public:
  BasicTensor<T> forward(const BasicTensor<T>& x, bool cache);
  BasicTensor<T> backward(const BasicTensor<T>& dy) const;

 private:
  std::vector<unsigned char> mask_;
};

/// y = x * W^T + b over (N, in) inputs.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::string name);

  BasicTensor<T> forward(const BasicTensor<T>& x, bool cache);
  BasicTensor<T> backward(const BasicTensor<T>& dy, bool need_input_grad);

  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }

  Param<T> weight;  // (out, in)
  Param<T> bias;    // (out)

 private:
  BasicTensor<T> input_;
};

}  // namespace rldsm::nn

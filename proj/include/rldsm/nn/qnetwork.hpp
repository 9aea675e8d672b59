#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rldsm/nn/layers.hpp"

namespace rldsm::nn {

/// Value-network architecture. The default is the deep profile: three
/// 5x5/stride-2 conv + batch-norm + ReLU blocks, a 192-unit hidden layer and
/// one output per action.
struct NetConfig {
  std::size_t in_planes = 2;
  std::size_t in_rows = 25;
  std::size_t in_cols = 24;
  std::vector<std::size_t> conv_channels{16, 32, 32};
  std::size_t kernel = 5;
  std::size_t stride = 2;
  std::size_t padding = 2;
  std::size_t fc_hidden = 192;
  std::size_t actions = 3;

  bool operator==(const NetConfig&) const = default;
};

NetConfig deep_profile();
/// One conv block instead of three; used by the depth ablation.
NetConfig shallow_profile();
NetConfig net_profile(const std::string& name);

template <typename T>
class BasicQNetwork {
 public:
  BasicQNetwork() = default;
  BasicQNetwork(const NetConfig& config, std::uint64_t seed);

  /// batch: (N, planes, rows, cols) -> Q-values (N, actions). Training mode
  /// uses batch statistics, updates running statistics and caches what
  /// backward() needs. Inference mode leaves the network untouched.
  BasicTensor<T> forward(const BasicTensor<T>& batch, Mode mode);

  /// Accumulates parameter gradients for dL/dQ after a training forward.
  void backward(const BasicTensor<T>& dq);

  void zero_grad();
  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  /// Batch-norm running statistics, in a fixed order.
  std::vector<BasicTensor<T>*> buffers();
  std::vector<const BasicTensor<T>*> buffers() const;

  /// Copies parameters and running statistics (not caches or gradients).
  void copy_state_from(const BasicQNetwork& other);

  std::size_t parameter_count() const;
  std::size_t flat_features() const { return hidden_.in_features(); }
  const NetConfig& config() const { return config_; }

 private:
  NetConfig config_;
  std::vector<Conv2d<T>> convs_;
  std::vector<BatchNorm<T>> norms_;
  std::vector<Relu<T>> conv_relus_;
  Linear<T> hidden_;
  Relu<T> hidden_relu_;
  Linear<T> head_;
  Shape last_conv_shape_;
};

using QNetwork = BasicQNetwork<float>;

template <typename T>
T huber_loss(T delta) {
  const T a = delta < T(0) ? -delta : delta;
  return a <= T(1) ? T(0.5) * delta * delta : a - T(0.5);
}

template <typename T>
T huber_grad(T delta) {
  return delta > T(1) ? T(1) : (delta < T(-1) ? T(-1) : delta);
}

/// Mean Huber loss of Q(s, a_n) against targets, plus dL/dQ with only the
/// taken action's column non-zero.
template <typename T>
struct MaskedLoss {
  double loss = 0.0;
  BasicTensor<T> dq;
};

template <typename T>
MaskedLoss<T> masked_huber(const BasicTensor<T>& q, std::span<const int> actions,
                           std::span<const T> targets);

/// Training forward, zero_grad and backward in one go. Leaves the gradients
/// of the mean Huber loss in the parameters and returns the loss.
template <typename T>
double loss_and_gradients(BasicQNetwork<T>& net, const BasicTensor<T>& batch,
                          std::span<const int> actions, std::span<const T> targets);

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double decay = 0.99;
  double epsilon = 1e-8;
};

template <typename T>
struct OptimizerState {
  RmsPropConfig config;
  std::vector<BasicTensor<T>> mean_square;
  std::uint64_t steps = 0;
};

template <typename T>
OptimizerState<T> make_optimizer_state(const std::vector<Param<T>*>& params,
                                       const RmsPropConfig& config = {});

/// v <- decay * v + (1 - decay) * g^2;  p <- p - lr * g / (sqrt(v) + eps)
template <typename T>
void rmsprop_step(const std::vector<Param<T>*>& params, OptimizerState<T>& state);

}  // namespace rldsm::nn

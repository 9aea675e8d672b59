#include "rldsm/nn/qnetwork.hpp"

#include <cmath>

namespace rldsm::nn {

NetConfig deep_profile() { return NetConfig{}; }

NetConfig shallow_profile() {
  NetConfig c;
  c.conv_channels = {16};
  return c;
}

NetConfig net_profile(const std::string& name) {
  if (name == "deep") return deep_profile();
  if (name == "shallow") return shallow_profile();
  throw std::invalid_argument("unknown network profile '" + name + "' (expected deep or shallow)");
}

template <typename T>
BasicQNetwork<T>::BasicQNetwork(const NetConfig& config, std::uint64_t seed) : config_(config) {
  if (config.conv_channels.empty()) throw ShapeError("network needs at least one conv layer");
  if (config.actions == 0 || config.fc_hidden == 0) throw ShapeError("empty dense layer");
  Rng rng(seed);
  std::size_t channels = config.in_planes, rows = config.in_rows, cols = config.in_cols;
  for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
    kernels::ConvGeometry g{channels, rows, cols, config.conv_channels[i],
                            config.kernel, config.stride, config.padding};
    if (!g.valid())
      throw ShapeError("conv" + std::to_string(i + 1) + " collapses a " + std::to_string(rows) +
                       "x" + std::to_string(cols) + " input");
    const std::string name = "conv" + std::to_string(i + 1);
    convs_.emplace_back(g, name + ".weight");
    he_uniform(convs_.back().weight.value, g.patch(), rng);
    norms_.emplace_back(g.out_channels, name + ".bn");
    conv_relus_.emplace_back();
    channels = g.out_channels;
    rows = g.out_height();
    cols = g.out_width();
  }
  hidden_ = Linear<T>(channels * rows * cols, config.fc_hidden, "fc_hidden");
  head_ = Linear<T>(config.fc_hidden, config.actions, "fc_out");
  he_uniform(hidden_.weight.value, hidden_.in_features(), rng);
  he_uniform(head_.weight.value, head_.in_features(), rng);
}

template <typename T>
BasicTensor<T> BasicQNetwork<T>::forward(const BasicTensor<T>& batch, Mode mode) {
  const auto& c = config_;
  if (batch.rank() != 4 || batch.dim(1) != c.in_planes || batch.dim(2) != c.in_rows ||
      batch.dim(3) != c.in_cols)
    throw ShapeError("network input: expected (N, " + std::to_string(c.in_planes) + ", " +
                     std::to_string(c.in_rows) + ", " + std::to_string(c.in_cols) + "), got " +
                     shape_string(batch.shape()));
  const std::size_t n = batch.dim(0);
  if (n == 0) throw ShapeError("network input: empty batch");
  const bool training = mode == Mode::Training;
  if (training && n < 2) throw ShapeError("network training needs a batch of at least two");

  // (N, C, H, W) -> (C, N, H, W)
  const std::size_t plane = c.in_rows * c.in_cols;
  BasicTensor<T> x({c.in_planes, n, c.in_rows, c.in_cols});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t p = 0; p < c.in_planes; ++p)
      std::copy_n(batch.data() + (s * c.in_planes + p) * plane, plane,
                  x.data() + (p * n + s) * plane);

  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = convs_[i].forward(x, training);
    x = norms_[i].forward(x, mode, training);
    x = conv_relus_[i].forward(x, training);
  }

  // (C, N, h, w) -> (N, C * h * w)
  const std::size_t channels = x.dim(0), spatial = x.dim(2) * x.dim(3);
  BasicTensor<T> flat({n, channels * spatial});
  for (std::size_t ch = 0; ch < channels; ++ch)
    for (std::size_t s = 0; s < n; ++s)
      std::copy_n(x.data() + (ch * n + s) * spatial, spatial,
                  flat.data() + s * channels * spatial + ch * spatial);
  if (training) last_conv_shape_ = x.shape();

  auto h = hidden_relu_.forward(hidden_.forward(flat, training), training);
  return head_.forward(h, training);
}

template <typename T>
void BasicQNetwork<T>::backward(const BasicTensor<T>& dq) {
  if (last_conv_shape_.empty()) throw ShapeError("backward without a training forward");
  auto dh = head_.backward(dq, true);
  auto dflat = hidden_.backward(hidden_relu_.backward(dh), true);

  const std::size_t channels = last_conv_shape_[0], n = last_conv_shape_[1];
  const std::size_t spatial = last_conv_shape_[2] * last_conv_shape_[3];
  BasicTensor<T> dx(last_conv_shape_);
  for (std::size_t ch = 0; ch < channels; ++ch)
    for (std::size_t s = 0; s < n; ++s)
      std::copy_n(dflat.data() + s * channels * spatial + ch * spatial, spatial,
                  dx.data() + (ch * n + s) * spatial);

  for (std::size_t i = convs_.size(); i-- > 0;) {
    dx = conv_relus_[i].backward(dx);
    dx = norms_[i].backward(dx);
    dx = convs_[i].backward(dx, i > 0);
  }
}

template <typename T>
void BasicQNetwork<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T(0));
}

template <typename T>
std::vector<Param<T>*> BasicQNetwork<T>::parameters() {
  std::vector<Param<T>*> out;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    out.push_back(&convs_[i].weight);
    out.push_back(&norms_[i].gamma);
    out.push_back(&norms_[i].beta);
  }
  out.push_back(&hidden_.weight);
  out.push_back(&hidden_.bias);
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

template <typename T>
std::vector<const Param<T>*> BasicQNetwork<T>::parameters() const {
  auto mut = const_cast<BasicQNetwork*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename T>
std::vector<BasicTensor<T>*> BasicQNetwork<T>::buffers() {
  std::vector<BasicTensor<T>*> out;
  for (auto& bn : norms_) {
    out.push_back(&bn.running_mean);
    out.push_back(&bn.running_var);
  }
  return out;
}

template <typename T>
std::vector<const BasicTensor<T>*> BasicQNetwork<T>::buffers() const {
  auto mut = const_cast<BasicQNetwork*>(this)->buffers();
  return {mut.begin(), mut.end()};
}

template <typename T>
void BasicQNetwork<T>::copy_state_from(const BasicQNetwork& other) {
  if (!(other.config_ == config_)) throw ShapeError("copy_state_from: architectures differ");
  auto dst = parameters();
  auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
  auto dbuf = buffers();
  auto sbuf = other.buffers();
  for (std::size_t i = 0; i < dbuf.size(); ++i) *dbuf[i] = *sbuf[i];
}

template <typename T>
std::size_t BasicQNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
MaskedLoss<T> masked_huber(const BasicTensor<T>& q, std::span<const int> actions,
                           std::span<const T> targets) {
  if (q.rank() != 2 || actions.size() != q.dim(0) || targets.size() != q.dim(0))
    throw ShapeError("masked_huber: batch sizes differ");
  const std::size_t n = q.dim(0), a = q.dim(1);
  MaskedLoss<T> out{0.0, BasicTensor<T>(q.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    if (actions[i] < 0 || static_cast<std::size_t>(actions[i]) >= a)
      throw ShapeError("masked_huber: action index out of range");
    const std::size_t k = i * a + static_cast<std::size_t>(actions[i]);
    const T delta = q[k] - targets[i];
    out.loss += huber_loss(delta);
    out.dq[k] = huber_grad(delta) / static_cast<T>(n);
  }
  out.loss /= static_cast<double>(n);
  return out;
}

template <typename T>
double loss_and_gradients(BasicQNetwork<T>& net, const BasicTensor<T>& batch,
                          std::span<const int> actions, std::span<const T> targets) {
  auto q = net.forward(batch, Mode::Training);
  auto l = masked_huber<T>(q, actions, targets);
  net.zero_grad();
  net.backward(l.dq);
  return l.loss;
}

template <typename T>
OptimizerState<T> make_optimizer_state(const std::vector<Param<T>*>& params,
                                       const RmsPropConfig& config) {
  OptimizerState<T> s;
  s.config = config;
  for (const auto* p : params) s.mean_square.emplace_back(p->value.shape(), T(0));
  return s;
}

template <typename T>
void rmsprop_step(const std::vector<Param<T>*>& params, OptimizerState<T>& state) {
  if (params.size() != state.mean_square.size())
    throw ShapeError("rmsprop: optimizer state does not match parameters");
  const T lr = static_cast<T>(state.config.learning_rate);
  const T decay = static_cast<T>(state.config.decay);
  const T eps = static_cast<T>(state.config.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& v = state.mean_square[i];
    if (v.shape() != p.value.shape()) throw ShapeError("rmsprop: accumulator shape mismatch");
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const T g = p.grad[j];
      v[j] = decay * v[j] + (T(1) - decay) * g * g;
      p.value[j] -= lr * g / (std::sqrt(v[j]) + eps);
    }
  }
  ++state.steps;
}

#define RLDSM_INSTANTIATE(T)                                                                  \
  template class BasicQNetwork<T>;                                                            \
  template MaskedLoss<T> masked_huber<T>(const BasicTensor<T>&, std::span<const int>,         \
                                         std::span<const T>);                                 \
  template double loss_and_gradients<T>(BasicQNetwork<T>&, const BasicTensor<T>&,             \
                                        std::span<const int>, std::span<const T>);            \
  template OptimizerState<T> make_optimizer_state<T>(const std::vector<Param<T>*>&,           \
                                                     const RmsPropConfig&);                   \
  template void rmsprop_step<T>(const std::vector<Param<T>*>&, OptimizerState<T>&);

RLDSM_INSTANTIATE(float)
RLDSM_INSTANTIATE(double)

#undef RLDSM_INSTANTIATE

}  // namespace rldsm::nn

#pragma once

// Central finite-difference checks of every layer's backward pass, in double
// precision. Each check returns the worst relative error it saw.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rldsm/nn/layers.hpp"
#include "rldsm/nn/qnetwork.hpp"
#include "rldsm/rng.hpp"

namespace gradcheck {

using rldsm::Rng;
using rldsm::nn::BasicTensor;
using Tensor = BasicTensor<double>;

inline constexpr double kStep = 1e-3;

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

inline void fill_uniform(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
}

// Perturbs every entry of `values` and compares the central difference of
// `loss` with `grad`.
inline double compare(Tensor& values, const Tensor& grad, const std::function<double()>& loss,
                      double step = kStep) {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + step;
    const double up = loss();
    values[i] = keep - step;
    const double down = loss();
    values[i] = keep;
    worst = std::max(worst, relative_error(grad[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Result {
  std::string layer;
  double worst = 0.0;
};

// Loss for single layers: a fixed random projection of the output.

inline Result conv(std::uint64_t seed) {
  Rng rng(seed);
  rldsm::nn::kernels::ConvGeometry g{2, 7, 6, 3, 5, 2, 2};
  rldsm::nn::Conv2d<double> layer(g, "conv");
  fill_uniform(layer.weight.value, rng);
  Tensor x({g.in_channels, 3, g.in_height, g.in_width});
  fill_uniform(x, rng);
  Tensor r({g.out_channels, 3, g.out_height(), g.out_width()});
  fill_uniform(r, rng);

  layer.forward(x, true);
  layer.weight.grad.fill(0.0);
  const Tensor dx = layer.backward(r, true);
  auto loss = [&] { return dot(layer.forward(x, false), r); };
  const double w = compare(layer.weight.value, layer.weight.grad, loss);
  return {"conv", std::max(w, compare(x, dx, loss))};
}

inline Result batch_norm(std::uint64_t seed) {
  Rng rng(seed);
  rldsm::nn::BatchNorm<double> layer(3, "bn");
  fill_uniform(layer.gamma.value, rng, 0.5, 1.5);
  fill_uniform(layer.beta.value, rng);
  Tensor x({3, 4, 2, 3});
  fill_uniform(x, rng, -2.0, 2.0);
  Tensor r(x.shape());
  fill_uniform(r, rng);

  layer.forward(x, rldsm::nn::Mode::Training, true);
  layer.gamma.grad.fill(0.0);
  layer.beta.grad.fill(0.0);
  const Tensor dx = layer.backward(r);
  auto loss = [&] { return dot(layer.forward(x, rldsm::nn::Mode::Training, false), r); };
  double worst = compare(layer.gamma.value, layer.gamma.grad, loss);
  worst = std::max(worst, compare(layer.beta.value, layer.beta.grad, loss));
  return {"batch_norm", std::max(worst, compare(x, dx, loss))};
}

inline Result linear(std::uint64_t seed) {
  Rng rng(seed);
  rldsm::nn::Linear<double> layer(7, 4, "fc");
  fill_uniform(layer.weight.value, rng);
  fill_uniform(layer.bias.value, rng);
  Tensor x({5, 7});
  fill_uniform(x, rng);
  Tensor r({5, 4});
  fill_uniform(r, rng);

  layer.forward(x, true);
  layer.weight.grad.fill(0.0);
  layer.bias.grad.fill(0.0);
  const Tensor dx = layer.backward(r, true);
  auto loss = [&] { return dot(layer.forward(x, false), r); };
  double worst = compare(layer.weight.value, layer.weight.grad, loss);
  worst = std::max(worst, compare(layer.bias.value, layer.bias.grad, loss));
  return {"linear", std::max(worst, compare(x, dx, loss))};
}

inline Result relu(std::uint64_t seed) {
  Rng rng(seed);
  rldsm::nn::Relu<double> layer;
  Tensor x({40});
  // keep inputs clear of the kink so the step never crosses it
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = rng.uniform(0.1, 1.0);
    x[i] = rng.below(2) ? m : -m;
  }
  Tensor r(x.shape());
  fill_uniform(r, rng);
  layer.forward(x, true);
  const Tensor dx = layer.backward(r);
  auto loss = [&] { return dot(layer.forward(x, false), r); };
  return {"relu", compare(x, dx, loss)};
}

inline Result huber_head(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 12, a = 3;
  Tensor q({n, a});
  std::vector<int> actions(n);
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    actions[i] = static_cast<int>(rng.below(a));
    // both branches of the loss, away from |delta| = 1
    const double delta = (i % 2 ? rng.uniform(0.0, 0.9) : rng.uniform(1.1, 4.0)) *
                         (rng.below(2) ? 1.0 : -1.0);
    for (std::size_t k = 0; k < a; ++k) q[i * a + k] = rng.uniform(-3.0, 3.0);
    targets[i] = q[i * a + static_cast<std::size_t>(actions[i])] - delta;
  }
  const auto l = rldsm::nn::masked_huber<double>(q, actions, targets);
  auto loss = [&] { return rldsm::nn::masked_huber<double>(q, actions, targets).loss; };
  return {"huber_head", compare(q, l.dq, loss, 1e-5)};
}

// Whole network: conv / batch-norm / ReLU stack, hidden layer and head under
// the masked Huber loss.
inline Result network(std::uint64_t seed) {
  Rng rng(seed);
  rldsm::nn::NetConfig cfg;
  cfg.in_rows = 9;
  cfg.in_cols = 8;
  cfg.conv_channels = {2, 3, 3};
  cfg.fc_hidden = 6;
  rldsm::nn::BasicQNetwork<double> net(cfg, seed);
  for (auto* p : net.parameters())
    if (p->name.find(".bn.") != std::string::npos) fill_uniform(p->value, rng, 0.5, 1.5);

  const std::size_t n = 4;
  Tensor batch({n, cfg.in_planes, cfg.in_rows, cfg.in_cols});
  fill_uniform(batch, rng);
  std::vector<int> actions(n);
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    actions[i] = static_cast<int>(rng.below(3));
    targets[i] = rng.uniform(-2.0, 2.0);
  }
  rldsm::nn::loss_and_gradients<double>(net, batch, actions, targets);
  auto loss = [&] {
    auto q = net.forward(batch, rldsm::nn::Mode::Training);
    return rldsm::nn::masked_huber<double>(q, actions, targets).loss;
  };
  double worst = 0.0;
  for (auto* p : net.parameters()) {
    Tensor grad = p->grad;
    worst = std::max(worst, compare(p->value, grad, loss, 1e-5));
  }
  return {"network", worst};
}

inline std::vector<std::function<Result(std::uint64_t)>> all_checks() {
  return {conv, batch_norm, linear, relu, huber_head, network};
}

}  // namespace gradcheck

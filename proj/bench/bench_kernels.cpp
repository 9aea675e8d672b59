// Times the serial reference kernels against the blocked OpenMP kernels and
// reports the cost of one full DQN update at the default network size.
//
//   bench_kernels [--batch N] [--reps R]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <vector>

#include <omp.h>

#include "rldsm/nn/kernels.hpp"
#include "rldsm/nn/qnetwork.hpp"
#include "rldsm/nn/reference.hpp"
#include "rldsm/rng.hpp"

using namespace rldsm;
using namespace rldsm::nn;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<float> random_vec(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return v;
}

void report(const char* name, double macs, double ref_ms, double fast_ms) {
  std::printf("%-28s ref %9.3f ms  blocked %8.3f ms  speedup %6.1fx  %6.2f GMAC/s\n", name,
              ref_ms, fast_ms, ref_ms / fast_ms, macs / (fast_ms * 1e6));
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t batch = 32;
  int reps = 20;
  for (int i = 1; i + 1 < argc; ++i) {
    if (!std::strcmp(argv[i], "--batch")) batch = std::strtoul(argv[++i], nullptr, 10);
    if (!std::strcmp(argv[i], "--reps")) reps = std::atoi(argv[++i]);
  }
  std::printf("threads=%d batch=%zu reps=%d\n", omp_get_max_threads(), batch, reps);
  Rng rng(1);

  // GEMM shaped like conv2's forward at this batch size.
  {
    const std::size_t M = 32, K = 400, N = 42 * batch;
    auto A = random_vec(M * K, rng), B = random_vec(K * N, rng);
    std::vector<float> C(M * N);
    const double ref = time_ms(std::max(1, reps / 10), [&] {
      reference::gemm(M, N, K, A.data(), B.data(), C.data());
    });
    const double fast = time_ms(reps, [&] {
      kernels::gemm(M, N, K, A.data(), K, B.data(), N, C.data(), N, false);
    });
    report("gemm 32x400 * 400xN", double(M) * N * K, ref, fast);
  }

  // Each conv layer of the default network, forward and backward.
  const NetConfig cfg = deep_profile();
  std::size_t ch = cfg.in_planes, rows = cfg.in_rows, cols = cfg.in_cols;
  for (std::size_t layer = 0; layer < cfg.conv_channels.size(); ++layer) {
    kernels::ConvGeometry g{ch, rows, cols, cfg.conv_channels[layer], cfg.kernel, cfg.stride,
                            cfg.padding};
    auto x = random_vec(batch * ch * g.in_plane(), rng);
    auto w = random_vec(g.out_channels * g.patch(), rng);
    auto dy = random_vec(batch * g.out_channels * g.out_plane(), rng);
    std::vector<float> y(dy.size()), dx(x.size()), dw(w.size());
    const double macs = double(batch) * g.out_channels * g.out_plane() * g.patch();

    const double ref_f = time_ms(std::max(1, reps / 10), [&] {
      reference::conv2d_forward(g, batch, x.data(), w.data(), y.data());
    });
    Conv2d<float> conv(g, "bench");
    conv.weight.value = Tensor({g.out_channels, g.patch()}, w);
    Tensor xt({ch, batch, rows, cols}, x);
    const double fast_f = time_ms(reps, [&] { conv.forward(xt, true); });
    char name[64];
    std::snprintf(name, sizeof name, "conv%zu forward", layer + 1);
    report(name, macs, ref_f, fast_f);

    const double ref_b = time_ms(std::max(1, reps / 10), [&] {
      reference::conv2d_backward(g, batch, x.data(), w.data(), dy.data(), dx.data(), dw.data());
    });
    Tensor dyt({g.out_channels, batch, g.out_height(), g.out_width()}, dy);
    const double fast_b = time_ms(reps, [&] { conv.backward(dyt, true); });
    std::snprintf(name, sizeof name, "conv%zu backward", layer + 1);
    report(name, 2 * macs, ref_b, fast_b);

    ch = g.out_channels;
    rows = g.out_height();
    cols = g.out_width();
  }

  // One DQN update: two inference passes over next states, one training
  // pass with backward, one RMSProp step.
  QNetwork policy(cfg, 3), target(cfg, 4);
  auto opt = make_optimizer_state(policy.parameters());
  Tensor states({batch, cfg.in_planes, cfg.in_rows, cfg.in_cols},
                random_vec(batch * cfg.in_planes * cfg.in_rows * cfg.in_cols, rng));
  std::vector<int> actions(batch);
  std::vector<float> targets(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    actions[i] = static_cast<int>(i % 3);
    targets[i] = static_cast<float>(rng.uniform(-5, 5));
  }
  Tensor single({1, cfg.in_planes, cfg.in_rows, cfg.in_cols});
  const double act_ms = time_ms(reps, [&] { policy.forward(single, Mode::Inference); });
  const double update_ms = time_ms(reps, [&] {
    policy.forward(states, Mode::Inference);
    target.forward(states, Mode::Inference);
    loss_and_gradients<float>(policy, states, actions, targets);
    rmsprop_step(policy.parameters(), opt);
  });
  const double infer_ms = time_ms(reps, [&] { policy.forward(states, Mode::Inference); });
  const double train_ms = time_ms(reps, [&] {
    loss_and_gradients<float>(policy, states, actions, targets);
  });
  std::printf("action selection (batch 1)   %8.3f ms\n", act_ms);
  std::printf("inference pass (batch %zu)    %8.3f ms\n", batch, infer_ms);
  std::printf("training pass (batch %zu)     %8.3f ms\n", batch, train_ms);
  std::printf("double-DQN update (batch %zu) %8.3f ms\n", batch, update_ms);
  std::printf("parameters: %zu\n", policy.parameter_count());
  return 0;
}

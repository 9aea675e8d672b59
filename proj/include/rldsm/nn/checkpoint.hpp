#pragma once

// Checkpoint container, all integers and floats little-endian:
//
//   char[8]  magic "RLDSMCKP"
//   u32      version (1)
//   u32 x3   in_planes, in_rows, in_cols
//   u32      conv layer count L, then L x u32 channel widths
//   u32 x5   kernel, stride, padding, fc_hidden, actions
//   u32      network count (1 = policy, 2 = policy + target)
//   per network: u32 tensor count, then tensors (parameters, then
//                batch-norm running mean/var pairs)
//   u8       optimizer present; if 1: f64 lr, f64 decay, f64 eps,
//            u64 steps, u32 tensor count, tensors
//   u64      environment steps done
//   u64      episodes done
//   string   RNG state (mt19937_64 text form)
//
// tensor := string name, u32 rank, u64 dims[rank], f32 data[prod(dims)]
// string := u32 byte length, bytes

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "rldsm/nn/qnetwork.hpp"

namespace rldsm::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  QNetwork policy;
  std::optional<QNetwork> target;
  std::optional<OptimizerState<float>> optimizer;
  std::uint64_t steps_done = 0;
  std::uint64_t episodes_done = 0;
  std::string rng_state;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rldsm::nn

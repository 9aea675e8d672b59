#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rldsm/grid.hpp"

namespace rldsm {

enum class Action : std::uint8_t { Left = 0, Right = 1, Drop = 2 };
inline constexpr int kNumActions = 3;

const char* to_string(Action a);

struct EnvConfig {
  int max_height = kDefaultMaxCells;
  /// Lateral moves allowed per block before Left/Right turn into Drop.
  int lateral_move_cap = 24;
};

struct GridState {
  Profile heights{};
  int max_height = kDefaultMaxCells;

  bool overflowed() const { return profile_peak(heights) > max_height; }
};

enum class QueueOrder { FileOrder, Shuffled };

struct Placement {
  std::string name;
  int start_hour = 0;
};

struct EnvState {
  GridState grid;
  Profile base{};
  std::optional<LoadBlock> active;
  std::deque<LoadBlock> queue;
  int steps_for_block = 0;
  int lateral_move_cap = 24;
  bool terminal = false;
  bool overflowed = false;
  std::vector<Placement> placements;
};

/// Everything a reward needs from one Drop.
struct SettleReport {
  LoadBlock block;  // position = settled start hour
  Profile heights_after{};
  int complete_lines = 0;
  int max_height_after = 0;
  int grid_cap = kDefaultMaxCells;
  bool overflow = false;
};

struct StepResult {
  EnvState next;
  std::optional<SettleReport> report;
  bool terminal = false;
};

/// Settles a dropped block column by column. Overflow is left to the caller.
GridState settle_block(GridState grid, const LoadBlock& block);

/// Raised for illegal environment use (overfull base, step after terminal).
class EnvError : public Error {
 public:
  using Error::Error;
};

EnvState reset(const Profile& base_profile, std::vector<LoadBlock> blocks, QueueOrder order,
               std::uint64_t seed, const EnvConfig& config = {});

StepResult step(const EnvState& state, Action action);

/// Start column for a freshly activated block.
inline int spawn_position(const LoadBlock& b) { return (kHoursPerDay - b.width()) / 2; }

/// Compact generator of a state image: the settled heights plus the active
/// block's cells laid out by grid column (zero where the block is absent).
struct Observation {
  Profile heights{};
  std::array<std::uint8_t, kHoursPerDay> active_cells{};

  bool operator==(const Observation&) const = default;
};

Observation observe(const EnvState& state);

/// Two binary planes of shape (rows = max_height, cols = 24). Row 0 is the
/// bottom of the grid. Plane 0 holds settled load; plane 1 holds the active
/// block hanging from the top edge.
class StateImage {
 public:
  StateImage(int rows) : rows_(rows), data_(2 * static_cast<std::size_t>(rows) * kHoursPerDay) {}

  int rows() const { return rows_; }
  static constexpr int planes() { return 2; }
  static constexpr int cols() { return kHoursPerDay; }

  std::uint8_t at(int plane, int row, int col) const { return data_[index(plane, row, col)]; }
  std::uint8_t& at(int plane, int row, int col) { return data_[index(plane, row, col)]; }
  std::span<const std::uint8_t> data() const { return data_; }

  bool operator==(const StateImage&) const = default;

 private:
  std::size_t index(int plane, int row, int col) const {
    return (static_cast<std::size_t>(plane) * rows_ + row) * kHoursPerDay + col;
  }
  int rows_;
  std::vector<std::uint8_t> data_;
};

StateImage render(const Observation& obs, int max_height);
StateImage render(const EnvState& state);

/// Number of network input rows after pooling grid rows pairwise.
inline int pooled_rows(int max_height) { return (max_height + 1) / 2; }

/// Writes the network input for one observation: 2 planes of
/// pooled_rows(max_height) x 24, each value the mean of two image rows.
void write_network_input(const Observation& obs, int max_height, std::span<float> out);

}  // namespace rldsm

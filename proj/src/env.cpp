#include "rldsm/env.hpp"

#include <algorithm>

#include "rldsm/rng.hpp"

namespace rldsm {

const char* to_string(Action a) {
  switch (a) {
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::Drop: return "drop";
  }
  return "?";
}

GridState settle_block(GridState grid, const LoadBlock& block) {
  for (int i = 0; i < block.width(); ++i) grid.heights[block.position + i] += block.column_cells[i];
  return grid;
}

namespace {

void activate_next(EnvState& s) {
  s.steps_for_block = 0;
  if (s.queue.empty()) {
    s.active.reset();
    s.terminal = true;
    return;
  }
  s.active = std::move(s.queue.front());
  s.queue.pop_front();
  s.active->position = spawn_position(*s.active);
}

}  // namespace

EnvState reset(const Profile& base_profile, std::vector<LoadBlock> blocks, QueueOrder order,
               std::uint64_t seed, const EnvConfig& config) {
  for (int h : base_profile)
    if (h < 0) throw EnvError("base profile has a negative height");
  if (profile_peak(base_profile) > config.max_height)
    throw EnvError("base profile already exceeds the grid height");
  for (const auto& b : blocks) {
    if (b.width() < 1 || b.width() > kHoursPerDay)
      throw EnvError("block '" + b.name + "' has an invalid width");
    for (int c : b.column_cells)
      if (c < 1) throw EnvError("block '" + b.name + "' has an empty column");
  }
  if (order == QueueOrder::Shuffled) {
    Rng rng(seed);
    rng.shuffle(blocks);
  }
  EnvState s;
  s.grid.heights = base_profile;
  s.grid.max_height = config.max_height;
  s.base = base_profile;
  s.lateral_move_cap = config.lateral_move_cap;
  s.queue.assign(std::make_move_iterator(blocks.begin()), std::make_move_iterator(blocks.end()));
  activate_next(s);
  return s;
}

StepResult step(const EnvState& state, Action action) {
  if (state.terminal || !state.active) throw EnvError("step called on a terminal state");
  StepResult r{state, std::nullopt, false};
  EnvState& s = r.next;
  LoadBlock& block = *s.active;

  if (action != Action::Drop && s.steps_for_block >= s.lateral_move_cap) action = Action::Drop;

  if (action == Action::Left || action == Action::Right) {
    const int delta = action == Action::Left ? -1 : 1;
    block.position = std::clamp(block.position + delta, 0, block.max_position());
    ++s.steps_for_block;
    return r;
  }

  s.grid = settle_block(s.grid, block);
  SettleReport report;
  report.heights_after = s.grid.heights;
  report.complete_lines = *std::min_element(s.grid.heights.begin(), s.grid.heights.end());
  report.max_height_after = profile_peak(s.grid.heights);
  report.grid_cap = s.grid.max_height;
  report.overflow = report.max_height_after > s.grid.max_height;
  s.placements.push_back({block.name, block.position});
  report.block = std::move(block);

  if (report.overflow) {
    s.active.reset();
    s.terminal = true;
    s.overflowed = true;
  } else {
    activate_next(s);
  }
  r.terminal = s.terminal;
  r.report = std::move(report);
  return r;
}

Observation observe(const EnvState& state) {
  Observation o;
  o.heights = state.grid.heights;
  if (state.active) {
    const auto& b = *state.active;
    for (int i = 0; i < b.width(); ++i)
      o.active_cells[b.position + i] = static_cast<std::uint8_t>(b.column_cells[i]);
  }
  return o;
}

namespace {

int band_start(const Observation& obs, int max_height) {
  int tallest = 0;
  for (auto c : obs.active_cells) tallest = std::max<int>(tallest, c);
  return std::max(0, max_height - tallest);
}

}  // namespace

StateImage render(const Observation& obs, int max_height) {
  StateImage img(max_height);
  const int band = band_start(obs, max_height);
  for (int t = 0; t < kHoursPerDay; ++t) {
    const int h = std::min(obs.heights[t], max_height);
    for (int r = 0; r < h; ++r) img.at(0, r, t) = 1;
    const int top = std::min(band + obs.active_cells[t], max_height);
    for (int r = band; r < top; ++r) img.at(1, r, t) = 1;
  }
  return img;
}

StateImage render(const EnvState& state) { return render(observe(state), state.grid.max_height); }

void write_network_input(const Observation& obs, int max_height, std::span<float> out) {
  const int rows = pooled_rows(max_height);
  const std::size_t plane = static_cast<std::size_t>(rows) * kHoursPerDay;
  if (out.size() != 2 * plane) throw EnvError("network input buffer has the wrong size");
  const int band = band_start(obs, max_height);
  // Number of occupied image rows in [lo, lo + 2) for a run [begin, end).
  auto overlap = [max_height](int lo, int begin, int end) {
    const int hi = std::min(lo + 2, max_height);
    return std::max(0, std::min(hi, end) - std::max(lo, begin));
  };
  for (int r = 0; r < rows; ++r) {
    for (int t = 0; t < kHoursPerDay; ++t) {
      const std::size_t i = static_cast<std::size_t>(r) * kHoursPerDay + t;
      out[i] = 0.5f * static_cast<float>(overlap(2 * r, 0, obs.heights[t]));
      out[plane + i] = 0.5f * static_cast<float>(overlap(2 * r, band, band + obs.active_cells[t]));
    }
  }
}

}  // namespace rldsm

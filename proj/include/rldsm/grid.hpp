#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rldsm {

inline constexpr int kHoursPerDay = 24;

/// Power represented by one grid cell. One column spans one hour, so a cell
/// is also 0.5 kWh of energy.
inline constexpr double kKwPerCell = 0.5;

/// 25 kW aggregate cap expressed in cells.
inline constexpr int kDefaultMaxCells = 50;

/// Aggregate load per hour, in cells.
using Profile = std::array<int, kHoursPerDay>;

struct CellQuantum {
  double kw_per_cell = kKwPerCell;
  int hours_per_column = 1;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A shiftable load rendered as per-hour columns of cells.
struct LoadBlock {
  std::string name;
  std::vector<int> column_cells;
  int position = 0;

  int width() const { return static_cast<int>(column_cells.size()); }
  int total_cells() const {
    return std::accumulate(column_cells.begin(), column_cells.end(), 0);
  }
  int max_cells() const {
    int m = 0;
    for (int c : column_cells) m = c > m ? c : m;
    return m;
  }
  int max_position() const { return kHoursPerDay - width(); }
};

inline int profile_total(const Profile& p) {
  return std::accumulate(p.begin(), p.end(), 0);
}

inline int profile_peak(const Profile& p) {
  int m = 0;
  for (int h : p) m = h > m ? h : m;
  return m;
}

inline double cells_to_kw(int cells) { return cells * kKwPerCell; }

/// Adds a block's columns onto a profile at the given start hour.
inline void add_block(Profile& p, const LoadBlock& b, int start) {
  for (int i = 0; i < b.width(); ++i) p[start + i] += b.column_cells[i];
}

}  // namespace rldsm

#include "rldsm/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace rldsm {

const char* to_string(OracleObjective o) {
  switch (o) {
    case OracleObjective::MinPeak: return "min_peak";
    case OracleObjective::MinCost: return "min_cost";
    case OracleObjective::PeakThenCost: return "peak_then_cost";
  }
  return "?";
}

const char* to_string(SolverQuality q) { return q == SolverQuality::Exact ? "exact" : "heuristic"; }

OracleObjective parse_oracle_objective(const std::string& s) {
  if (s == "min_peak" || s == "min-peak" || s == "peak") return OracleObjective::MinPeak;
  if (s == "min_cost" || s == "min-cost" || s == "cost") return OracleObjective::MinCost;
  if (s == "peak_then_cost" || s == "peak-then-cost" || s == "peak-cost")
    return OracleObjective::PeakThenCost;
  throw Error("unknown oracle objective '" + s + "'");
}

Schedule make_schedule(const Profile& base, const std::vector<LoadBlock>& blocks,
                       const std::map<std::string, int>& assignments, const Tariff& tariff) {
  Schedule s;
  s.assignments = assignments;
  s.resulting_profile = base;
  for (const auto& [name, start] : assignments) {
    auto it = std::find_if(blocks.begin(), blocks.end(),
                           [&](const LoadBlock& b) { return b.name == name; });
    if (it == blocks.end()) throw Error("schedule names unknown appliance '" + name + "'");
    if (start < 0 || start > it->max_position())
      throw Error("start hour " + std::to_string(start) + " is out of range for '" + name + "'");
    add_block(s.resulting_profile, *it, start);
  }
  s.peak_kw = cells_to_kw(profile_peak(s.resulting_profile));
  s.daily_cost_cents = daily_cost(s.resulting_profile, tariff).cents();
  return s;
}

Schedule make_schedule(const Profile& base, const std::vector<LoadBlock>& blocks,
                       const std::vector<Placement>& placements, const Tariff& tariff) {
  std::map<std::string, int> a;
  for (const auto& p : placements) a[p.name] = p.start_hour;
  return make_schedule(base, blocks, a, tariff);
}

namespace {

// Ordering key: objective terms, start-hour sum, then start hours in name
// order. Smaller is better.
struct Key {
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t sum = 0;
  std::vector<int> starts;

  auto prefix() const { return std::tuple(a, b, sum); }
  bool operator<(const Key& o) const {
    if (prefix() != o.prefix()) return prefix() < o.prefix();
    return starts < o.starts;
  }
};

// Packs the (a, b, sum) prefix so a shared bound can live in one atomic.
std::uint64_t pack(std::int64_t a, std::int64_t b, std::int64_t sum) {
  constexpr std::int64_t lim = std::int64_t{1} << 21;
  a = std::min(a, lim - 1);
  b = std::min(b, lim - 1);
  sum = std::min(sum, lim - 1);
  return (static_cast<std::uint64_t>(a) << 42) | (static_cast<std::uint64_t>(b) << 21) |
         static_cast<std::uint64_t>(sum);
}

struct Instance {
  Profile base{};
  std::vector<LoadBlock> blocks;  // sorted by name
  HourlyPrices prices{};
  OracleObjective objective = OracleObjective::MinPeak;
  int max_height = kDefaultMaxCells;
  std::vector<std::int64_t> min_cost_suffix;  // sum of cheapest placements of blocks[d..]
};

std::int64_t block_cost(const LoadBlock& b, int start, const HourlyPrices& prices) {
  std::int64_t c = 0;
  for (int i = 0; i < b.width(); ++i) c += std::int64_t{b.column_cells[i]} * prices[start + i];
  return c;
}

Key make_key(const Instance& in, int peak, std::int64_t cost, std::int64_t sum,
             std::vector<int> starts) {
  Key k;
  switch (in.objective) {
    case OracleObjective::MinPeak: k.a = peak; break;
    case OracleObjective::MinCost: k.a = cost; break;
    case OracleObjective::PeakThenCost:
      k.a = peak;
      k.b = cost;
      break;
  }
  k.sum = sum;
  k.starts = std::move(starts);
  return k;
}

Instance make_instance(const Profile& base, const std::vector<LoadBlock>& blocks,
                       OracleObjective objective, const Tariff& tariff, int max_height) {
  Instance in;
  in.base = base;
  in.blocks = blocks;
  std::sort(in.blocks.begin(), in.blocks.end(),
            [](const LoadBlock& x, const LoadBlock& y) { return x.name < y.name; });
  for (std::size_t i = 1; i < in.blocks.size(); ++i)
    if (in.blocks[i].name == in.blocks[i - 1].name)
      throw Error("duplicate appliance name '" + in.blocks[i].name + "'");
  in.prices = hourly_prices(tariff);
  in.objective = objective;
  in.max_height = max_height;
  if (profile_peak(base) > max_height) throw InfeasibleError("base load already exceeds the grid");
  in.min_cost_suffix.assign(in.blocks.size() + 1, 0);
  for (std::size_t d = in.blocks.size(); d-- > 0;) {
    const auto& b = in.blocks[d];
    if (b.width() < 1 || b.width() > kHoursPerDay)
      throw Error("block '" + b.name + "' has an invalid width");
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    bool fits = false;
    for (int p = 0; p <= b.max_position(); ++p) {
      best = std::min(best, block_cost(b, p, in.prices));
      bool ok = true;
      for (int i = 0; i < b.width(); ++i) ok = ok && base[p + i] + b.column_cells[i] <= max_height;
      fits = fits || ok;
    }
    if (!fits) throw InfeasibleError("block '" + b.name + "' fits under the grid cap nowhere");
    in.min_cost_suffix[d] = in.min_cost_suffix[d + 1] + best;
  }
  return in;
}

Schedule to_schedule(const Instance& in, const std::vector<int>& starts, const Tariff& tariff,
                     SolverQuality quality) {
  std::map<std::string, int> a;
  for (std::size_t i = 0; i < in.blocks.size(); ++i) a[in.blocks[i].name] = starts[i];
  Schedule s = make_schedule(in.base, in.blocks, a, tariff);
  s.quality = quality;
  return s;
}

// Depth-first branch and bound over blocks in name order, positions
// ascending, so leaves are visited in lexicographic order of start hours.
class Search {
 public:
  Search(const Instance& in, std::atomic<std::uint64_t>& shared) : in_(in), shared_(shared) {}

  void run_from(int first_position) {
    prof_ = in_.base;
    starts_.assign(in_.blocks.size(), 0);
    place(0, first_position, 0, 0);
  }

  const std::optional<Key>& best() const { return best_; }

 private:
  void place(std::size_t d, int p, std::int64_t cost, std::int64_t sum) {
    const auto& b = in_.blocks[d];
    add_block(prof_, b, p);
    starts_[d] = p;
    descend(d + 1, cost + block_cost(b, p, in_.prices), sum + p);
    for (int i = 0; i < b.width(); ++i) prof_[p + i] -= b.column_cells[i];
  }

  void descend(std::size_t d, std::int64_t cost, std::int64_t sum) {
    const int peak = profile_peak(prof_);
    if (peak > in_.max_height) return;
    if (d == in_.blocks.size()) {
      Key k = make_key(in_, peak, cost, sum, starts_);
      if (!best_ || k < *best_) {
        const std::uint64_t packed = pack(k.a, k.b, k.sum);
        best_ = std::move(k);
        std::uint64_t cur = shared_.load(std::memory_order_relaxed);
        while (packed < cur && !shared_.compare_exchange_weak(cur, packed)) {
        }
      }
      return;
    }
    // Every unplaced block lands somewhere, so the final peak is at least the
    // best position each one could find on the current profile.
    int peak_lb = peak;
    for (std::size_t j = d; j < in_.blocks.size(); ++j) {
      const auto& b = in_.blocks[j];
      int least = std::numeric_limits<int>::max();
      for (int q = 0; q <= b.max_position() && least > peak_lb; ++q) {
        int top = 0;
        for (int i = 0; i < b.width(); ++i) top = std::max(top, prof_[q + i] + b.column_cells[i]);
        least = std::min(least, top);
      }
      peak_lb = std::max(peak_lb, least);
    }
    if (peak_lb > in_.max_height) return;
    const Key lb = make_key(in_, peak_lb, cost + in_.min_cost_suffix[d], sum, {});
    if (best_ && lb.prefix() >= best_->prefix()) return;
    if (pack(lb.a, lb.b, lb.sum) > shared_.load(std::memory_order_relaxed)) return;

    for (int p = 0; p <= in_.blocks[d].max_position(); ++p) place(d, p, cost, sum);
  }

  const Instance& in_;
  std::atomic<std::uint64_t>& shared_;
  Profile prof_{};
  std::vector<int> starts_;
  std::optional<Key> best_;
};

// Places blocks one at a time, largest first, each at its best position.
std::optional<Key> greedy(const Instance& in) {
  std::vector<std::size_t> order(in.blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return in.blocks[x].total_cells() > in.blocks[y].total_cells();
  });
  Profile prof = in.base;
  std::vector<int> starts(in.blocks.size(), 0);
  std::int64_t cost = 0, sum = 0;
  for (std::size_t j : order) {
    const auto& b = in.blocks[j];
    std::optional<std::tuple<Key, int>> choice;
    for (int p = 0; p <= b.max_position(); ++p) {
      Profile t = prof;
      add_block(t, b, p);
      if (profile_peak(t) > in.max_height) continue;
      Key k = make_key(in, profile_peak(t), cost + block_cost(b, p, in.prices), sum + p, {});
      if (!choice || k < std::get<0>(*choice)) choice = std::tuple(std::move(k), p);
    }
    if (!choice) return std::nullopt;
    const int p = std::get<1>(*choice);
    add_block(prof, b, p);
    starts[j] = p;
    cost += block_cost(b, p, in.prices);
    sum += p;
  }
  return make_key(in, profile_peak(prof), cost, sum, starts);
}

struct BeamNode {
  Profile prof{};
  std::int64_t cost = 0;
  std::int64_t sum = 0;
  std::int64_t square = 0;  // sum of squared heights, favours flat profiles
  std::vector<int> starts;
};

Schedule beam_search(const Instance& in, const Tariff& tariff, std::size_t width) {
  std::vector<std::size_t> order(in.blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return in.blocks[x].total_cells() > in.blocks[y].total_cells();
  });
  auto square = [](const Profile& p) {
    std::int64_t s = 0;
    for (int h : p) s += std::int64_t{h} * h;
    return s;
  };
  std::vector<BeamNode> beam(1);
  beam[0].prof = in.base;
  beam[0].square = square(in.base);
  beam[0].starts.assign(in.blocks.size(), -1);
  for (std::size_t j : order) {
    const auto& b = in.blocks[j];
    std::vector<BeamNode> next;
    for (const auto& node : beam)
      for (int p = 0; p <= b.max_position(); ++p) {
        BeamNode c = node;
        add_block(c.prof, b, p);
        if (profile_peak(c.prof) > in.max_height) continue;
        c.cost += block_cost(b, p, in.prices);
        c.sum += p;
        c.square = square(c.prof);
        c.starts[j] = p;
        next.push_back(std::move(c));
      }
    auto rank = [&](const BeamNode& n) {
      const Key k = make_key(in, profile_peak(n.prof), n.cost, n.sum, {});
      return std::tuple(k.a, k.b, n.square, n.sum);
    };
    std::stable_sort(next.begin(), next.end(), [&](const BeamNode& x, const BeamNode& y) {
      const auto rx = rank(x), ry = rank(y);
      return rx != ry ? rx < ry : x.starts < y.starts;
    });
    if (next.size() > width) next.resize(width);
    if (next.empty()) throw InfeasibleError("beam search found no placement under the grid cap");
    beam = std::move(next);
  }
  const BeamNode* best = nullptr;
  Key best_key;
  for (const auto& n : beam) {
    Key k = make_key(in, profile_peak(n.prof), n.cost, n.sum, n.starts);
    if (!best || k < best_key) {
      best = &n;
      best_key = std::move(k);
    }
  }
  return to_schedule(in, best->starts, tariff, SolverQuality::Heuristic);
}

}  // namespace

Schedule solve(const Profile& base, const std::vector<LoadBlock>& blocks,
               OracleObjective objective, const Tariff& tariff, const OracleOptions& options) {
  const Instance in = make_instance(base, blocks, objective, tariff, options.max_height);
  if (in.blocks.empty()) return to_schedule(in, {}, tariff, SolverQuality::Exact);
  if (in.blocks.size() > options.exhaustive_limit)
    return beam_search(in, tariff, options.beam_width);

  std::atomic<std::uint64_t> shared{std::numeric_limits<std::uint64_t>::max()};
  if (const auto g = greedy(in)) shared = pack(g->a, g->b, g->sum);

  const int first = in.blocks[0].max_position() + 1;
  std::vector<std::optional<Key>> found(static_cast<std::size_t>(first));
#pragma omp parallel for schedule(dynamic, 1)
  for (int p = 0; p < first; ++p) {
    Search s(in, shared);
    s.run_from(p);
    found[static_cast<std::size_t>(p)] = s.best();
  }
  const Key* best = nullptr;
  for (const auto& k : found)
    if (k && (!best || *k < *best)) best = &*k;
  if (!best) throw InfeasibleError("no placement keeps every hour under the grid cap");
  return to_schedule(in, best->starts, tariff, SolverQuality::Exact);
}

Schedule brute_force(const Profile& base, const std::vector<LoadBlock>& blocks,
                     OracleObjective objective, const Tariff& tariff, int max_height) {
  const Instance in = make_instance(base, blocks, objective, tariff, max_height);
  const std::size_t n = in.blocks.size();
  std::vector<int> starts(n, 0);
  std::optional<Key> best;
  while (true) {
    Profile prof = in.base;
    std::int64_t cost = 0, sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      add_block(prof, in.blocks[i], starts[i]);
      cost += block_cost(in.blocks[i], starts[i], in.prices);
      sum += starts[i];
    }
    if (profile_peak(prof) <= in.max_height) {
      Key k = make_key(in, profile_peak(prof), cost, sum, starts);
      if (!best || k < *best) best = std::move(k);
    }
    std::size_t i = n;
    while (i > 0 && starts[i - 1] == in.blocks[i - 1].max_position()) starts[--i] = 0;
    if (i == 0) break;
    ++starts[i - 1];
  }
  if (!best) throw InfeasibleError("no placement keeps every hour under the grid cap");
  return to_schedule(in, best->starts, tariff, SolverQuality::Exact);
}

Verification verify(const Schedule& schedule, const Profile& base,
                    const std::vector<LoadBlock>& blocks, const Tariff& tariff, int max_height) {
  Verification v;
  v.profile = base;
  for (const auto& [name, start] : schedule.assignments)
    if (std::none_of(blocks.begin(), blocks.end(),
                     [&](const LoadBlock& b) { return b.name == name; }))
      v.problems.push_back("unknown appliance '" + name + "'");
  for (const auto& b : blocks) {
    auto it = schedule.assignments.find(b.name);
    if (it == schedule.assignments.end()) {
      v.problems.push_back("appliance '" + b.name + "' has no start hour");
      continue;
    }
    if (it->second < 0 || it->second > b.max_position()) {
      v.problems.push_back("appliance '" + b.name + "' starts out of range");
      continue;
    }
    add_block(v.profile, b, it->second);
  }
  v.peak_kw = cells_to_kw(profile_peak(v.profile));
  v.daily_cost_cents = daily_cost(v.profile, tariff).cents();
  if (profile_peak(v.profile) > max_height) v.problems.push_back("profile exceeds the grid cap");
  if (v.profile != schedule.resulting_profile) v.problems.push_back("recorded profile differs");
  if (v.peak_kw != schedule.peak_kw) v.problems.push_back("recorded peak differs");
  if (v.daily_cost_cents != schedule.daily_cost_cents)
    v.problems.push_back("recorded daily cost differs");
  v.ok = v.problems.empty();
  return v;
}

void write_schedule_csv(std::ostream& out, const Schedule& s) {
  out << "appliance,start_hour" << (s.quality ? ",quality" : "") << '\n';
  for (const auto& [name, start] : s.assignments) {
    out << name << ',' << start;
    if (s.quality) out << ',' << to_string(*s.quality);
    out << '\n';
  }
}

Schedule read_schedule_csv(std::istream& in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw Error("schedule CSV is empty");
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "appliance" || header[1] != "start_hour")
    throw Error("schedule CSV header must start with appliance,start_hour");
  const bool has_quality = header.size() > 2 && header[2] == "quality";
  Schedule s;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() < 2) throw Error("schedule CSV row " + std::to_string(row) + " is short");
    try {
      s.assignments[cells[0]] = std::stoi(cells[1]);
    } catch (const std::exception&) {
      throw Error("schedule CSV row " + std::to_string(row) + " has a bad start hour");
    }
    if (has_quality && cells.size() > 2)
      s.quality = cells[2] == "exact" ? SolverQuality::Exact : SolverQuality::Heuristic;
  }
  return s;
}

}  // namespace rldsm

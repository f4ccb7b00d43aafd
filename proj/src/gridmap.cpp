#include "safeplan/gridmap.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <map>

#include "safeplan/error.hpp"

namespace safeplan {

std::string to_string(Cell c) {
  return "(" + std::to_string(c.col) + "," + std::to_string(c.row) + ")";
}

std::string_view to_string(Move m) {
  switch (m) {
    case Move::Stay: return "Stay";
    case Move::North: return "North";
    case Move::East: return "East";
    case Move::South: return "South";
    case Move::West: return "West";
  }
  return "?";
}

std::optional<Move> parse_move(std::string_view name) {
  auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
  for (Move m : kMoves) {
    const std::string_view full = to_string(m);
    if (full.size() == name.size() &&
        std::equal(full.begin(), full.end(), name.begin(),
                   [&](char a, char b) { return lower(a) == lower(b); })) {
      return m;
    }
  }
  return std::nullopt;
}

std::vector<Move> MoveSet::to_vector() const {
  std::vector<Move> out;
  for (Move m : kMoves) {
    if (contains(m)) out.push_back(m);
  }
  return out;
}

namespace {

constexpr std::array<Cell, 4> kOrthogonal{{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};
constexpr std::array<Cell, 4> kDiagonal{{{1, 1}, {1, -1}, {-1, -1}, {-1, 1}}};

}  // namespace

GridMap::GridMap(int width, int height, std::vector<Cell> obstacles, Cell goal)
    : width_(width), height_(height), goal_(goal) {
  if (width <= 0 || height <= 0) {
    throw ValidationError("map dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  free_index_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  for (const Cell& o : obstacles) {
    if (!in_bounds(o)) throw ValidationError("obstacle " + to_string(o) + " is out of bounds");
    free_index_[linear(o)] = -1;
  }
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const Cell c{col, row};
      if (free_index_[linear(c)] < 0) continue;
      free_index_[linear(c)] = static_cast<int>(free_cells_.size());
      free_cells_.push_back(c);
    }
  }
  if (free_cells_.empty()) throw ValidationError("obstacles fill the whole map");
  if (!in_bounds(goal)) throw ValidationError("goal " + to_string(goal) + " is out of bounds");
  if (!is_free(goal)) throw ValidationError("goal " + to_string(goal) + " is an obstacle");

  const std::size_t n = free_cells_.size();
  step_.assign(n * kMoves.size(), -1);
  admissible_.assign(n, MoveSet{});
  orth_offsets_.push_back(0);
  diag_offsets_.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    const Cell x = free_cells_[i];
    for (Move m : kMoves) {
      const int j = free_index(x + displacement(m));
      step_[i * kMoves.size() + static_cast<std::size_t>(m)] = j;
      if (j >= 0) admissible_[i].insert(m);
    }
    for (Cell d : kOrthogonal) {
      const int j = free_index(x + d);
      if (j >= 0) orth_.push_back(j);
    }
    for (Cell d : kDiagonal) {
      const int j = free_index(x + d);
      if (j >= 0) diag_.push_back(j);
    }
    orth_offsets_.push_back(static_cast<int>(orth_.size()));
    diag_offsets_.push_back(static_cast<int>(diag_.size()));
  }
}

std::vector<Cell> GridMap::obstacles() const {
  std::vector<Cell> out;
  for (int row = 0; row < height_; ++row) {
    for (int col = 0; col < width_; ++col) {
      if (free_index_[linear({col, row})] < 0) out.push_back({col, row});
    }
  }
  return out;
}

int GridMap::require_free(Cell c) const {
  if (!in_bounds(c)) throw ValidationError("cell " + to_string(c) + " is out of bounds");
  const int i = free_index_[linear(c)];
  if (i < 0) throw ValidationError("cell " + to_string(c) + " is an obstacle");
  return i;
}

std::span<const int> GridMap::orthogonal_neighbors(int index) const {
  const auto i = static_cast<std::size_t>(index);
  return std::span<const int>(orth_).subspan(static_cast<std::size_t>(orth_offsets_[i]),
                                             static_cast<std::size_t>(orth_offsets_[i + 1] - orth_offsets_[i]));
}

std::span<const int> GridMap::diagonal_neighbors(int index) const {
  const auto i = static_cast<std::size_t>(index);
  return std::span<const int>(diag_).subspan(static_cast<std::size_t>(diag_offsets_[i]),
                                             static_cast<std::size_t>(diag_offsets_[i + 1] - diag_offsets_[i]));
}

std::vector<Cell> GridMap::orthogonal_neighbors(Cell x) const {
  std::vector<Cell> out;
  for (int j : orthogonal_neighbors(require_free(x))) out.push_back(cell_at(j));
  return out;
}

std::vector<Cell> GridMap::diagonal_neighbors(Cell x) const {
  std::vector<Cell> out;
  for (int j : diagonal_neighbors(require_free(x))) out.push_back(cell_at(j));
  return out;
}

MoveSet GridMap::admissible_actions(Cell x) const { return admissible_actions(require_free(x)); }

std::vector<int> GridMap::distances_from(int from) const {
  std::vector<int> dist(free_cells_.size(), -1);
  std::deque<int> queue{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    for (int j : orthogonal_neighbors(i)) {
      if (dist[static_cast<std::size_t>(j)] >= 0) continue;
      dist[static_cast<std::size_t>(j)] = dist[static_cast<std::size_t>(i)] + 1;
      queue.push_back(j);
    }
  }
  return dist;
}

// ---------------------------------------------------------------------------

MotionKernel::MotionKernel(const GridMap& map, bool deterministic)
    : deterministic_(deterministic), width_(map.width()), height_(map.height()) {
  free_index_.reserve(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_));
  for (int row = 0; row < height_; ++row) {
    for (int col = 0; col < width_; ++col) free_index_.push_back(map.free_index({col, row}));
  }
  admissible_.reserve(map.free_count());
  for (std::size_t i = 0; i < map.free_count(); ++i) {
    admissible_.push_back(map.admissible_actions(static_cast<int>(i)));
  }
}

MotionKernel MotionKernel::deterministic(const GridMap& map) {
  return tabular(map, {});
}

MotionKernel MotionKernel::tabular(const GridMap& map, std::span<const MotionEntry> entries) {
  MotionKernel kernel(map, entries.empty());
  const std::size_t n = map.free_count();

  // (cell, move) -> explicit outcomes, validated up front.
  std::map<std::pair<int, int>, std::vector<MotionOutcome>> table;
  for (const MotionEntry& e : entries) {
    const int from = map.require_free(e.cell);
    if (!map.admissible_actions(from).contains(e.action)) {
      throw ValidationError("motion table: action " + std::string(to_string(e.action)) +
                            " is not admissible at " + to_string(e.cell));
    }
    const auto key = std::make_pair(from, static_cast<int>(e.action));
    if (table.contains(key)) {
      throw ValidationError("motion table: duplicate entry for " + to_string(e.cell) + " " +
                            std::string(to_string(e.action)));
    }
    std::vector<MotionOutcome> outs;
    double total = 0.0;
    for (const auto& [to, p] : e.outcomes) {
      if (!(p >= 0.0) || p > 1.0) {
        throw ValidationError("motion table: probability out of [0,1] at " + to_string(e.cell));
      }
      const int j = map.free_index(to);
      if (j < 0) {
        throw ValidationError("motion table: successor " + to_string(to) + " of " +
                              to_string(e.cell) + " is not a free cell");
      }
      std::optional<Move> dir;
      for (Move m : kMoves) {
        if (e.cell + displacement(m) == to) dir = m;
      }
      if (!dir) {
        throw ValidationError("motion table: successor " + to_string(to) + " is not adjacent to " +
                              to_string(e.cell));
      }
      total += p;
      if (p == 0.0) continue;
      auto it = std::find_if(outs.begin(), outs.end(), [&](const auto& o) { return o.cell == j; });
      if (it != outs.end()) {
        it->probability += p;
      } else {
        outs.push_back({j, *dir, p});
      }
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ValidationError("motion table: probabilities at " + to_string(e.cell) + " " +
                            std::string(to_string(e.action)) + " sum to " + std::to_string(total));
    }
    std::sort(outs.begin(), outs.end(),
              [](const auto& a, const auto& b) { return a.direction < b.direction; });
    table.emplace(key, std::move(outs));
  }

  kernel.offsets_.reserve(n * kMoves.size() + 1);
  kernel.offsets_.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (Move m : kMoves) {
      const int to = map.step(static_cast<int>(i), m);
      if (to >= 0) {
        auto it = table.find({static_cast<int>(i), static_cast<int>(m)});
        if (it != table.end()) {
          kernel.outcomes_.insert(kernel.outcomes_.end(), it->second.begin(), it->second.end());
        } else {
          kernel.outcomes_.push_back({to, m, 1.0});
        }
      }
      kernel.offsets_.push_back(static_cast<std::uint32_t>(kernel.outcomes_.size()));
    }
  }
  return kernel;
}

MotionKernel MotionKernel::slip(const GridMap& map, double p_intended) {
  if (!(p_intended >= 0.0 && p_intended <= 1.0)) {
    throw ValidationError("slip probability must lie in [0,1]");
  }
  std::vector<MotionEntry> entries;
  for (const Cell& x : map.free_cells()) {
    for (Move m : map.admissible_actions(x).to_vector()) {
      if (m == Move::Stay) continue;
      entries.push_back({x, m, {{x + displacement(m), p_intended}, {x, 1.0 - p_intended}}});
    }
  }
  return tabular(map, entries);
}

std::span<const MotionOutcome> MotionKernel::outcomes(int cell, Move u) const {
  const auto i = static_cast<std::size_t>(cell);
  if (cell < 0 || i >= admissible_.size()) throw ValidationError("motion: cell index out of range");
  if (!admissible_[i].contains(u)) {
    throw ValidationError("motion: action " + std::string(to_string(u)) +
                          " is not admissible at cell index " + std::to_string(cell));
  }
  const std::size_t slot = i * kMoves.size() + static_cast<std::size_t>(u);
  return std::span<const MotionOutcome>(outcomes_).subspan(offsets_[slot],
                                                           offsets_[slot + 1] - offsets_[slot]);
}

double MotionKernel::motion_prob(Cell to, Cell from, Move u) const {
  auto index_of = [&](Cell c) {
    if (c.col < 0 || c.row < 0 || c.col >= width_ || c.row >= height_) return -1;
    return free_index_[static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
                       static_cast<std::size_t>(c.col)];
  };
  const int i = index_of(from);
  if (i < 0) throw ValidationError("motion: origin " + to_string(from) + " is not a free cell");
  const int j = index_of(to);
  double p = 0.0;
  for (const MotionOutcome& o : outcomes(i, u)) {
    if (o.cell == j) p += o.probability;
  }
  return p;
}

}  // namespace safeplan

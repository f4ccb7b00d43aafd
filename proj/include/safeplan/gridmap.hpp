#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace safeplan {

/// Grid cell addressed as (col, row). North is row + 1.
struct Cell {
  int col = 0;
  int row = 0;

  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
  friend constexpr Cell operator+(Cell a, Cell b) { return {a.col + b.col, a.row + b.row}; }
};

std::string to_string(Cell c);

enum class Move : std::uint8_t { Stay = 0, North = 1, East = 2, South = 3, West = 4 };

// Fixed action order; also the argmax tie-break order of the planner.
inline constexpr std::array<Move, 5> kMoves{Move::Stay, Move::North, Move::East, Move::South,
                                            Move::West};

constexpr Cell displacement(Move m) {
  switch (m) {
    case Move::Stay: return {0, 0};
    case Move::North: return {0, 1};
    case Move::East: return {1, 0};
    case Move::South: return {0, -1};
    case Move::West: return {-1, 0};
  }
  return {0, 0};
}

std::string_view to_string(Move m);
std::optional<Move> parse_move(std::string_view name);

/// Small set of moves, one bit per Move value.
class MoveSet {
 public:
  constexpr MoveSet() = default;
  constexpr explicit MoveSet(std::uint8_t bits) : bits_(bits) {}

  constexpr bool contains(Move m) const { return (bits_ >> static_cast<int>(m)) & 1u; }
  constexpr void insert(Move m) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<int>(m)); }
  constexpr int size() const { return std::popcount(static_cast<unsigned>(bits_)); }
  constexpr std::uint8_t bits() const { return bits_; }
  std::vector<Move> to_vector() const;

  friend constexpr bool operator==(MoveSet, MoveSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

/// Rectangular occupancy map with a designated exit cell.
///
/// Free cells get a dense index in row-major order (row 0 first); every
/// per-cell table in the library is laid out over that index. The map is
/// immutable after construction.
class GridMap {
 public:
  GridMap(int width, int height, std::vector<Cell> obstacles, Cell goal);

  int width() const { return width_; }
  int height() const { return height_; }
  Cell goal() const { return goal_; }
  int goal_index() const { return free_index_[linear(goal_)]; }

  bool in_bounds(Cell c) const {
    return c.col >= 0 && c.row >= 0 && c.col < width_ && c.row < height_;
  }
  bool is_free(Cell c) const { return in_bounds(c) && free_index_[linear(c)] >= 0; }
  bool is_obstacle(Cell c) const { return in_bounds(c) && free_index_[linear(c)] < 0; }

  std::size_t free_count() const { return free_cells_.size(); }
  const std::vector<Cell>& free_cells() const { return free_cells_; }
  std::vector<Cell> obstacles() const;

  /// Dense index of a free cell, or -1 for obstacles and out-of-bounds cells.
  int free_index(Cell c) const { return in_bounds(c) ? free_index_[linear(c)] : -1; }
  /// As free_index, but throws ValidationError naming the cell.
  int require_free(Cell c) const;
  Cell cell_at(int index) const { return free_cells_[static_cast<std::size_t>(index)]; }

  std::vector<Cell> orthogonal_neighbors(Cell x) const;
  std::vector<Cell> diagonal_neighbors(Cell x) const;
  MoveSet admissible_actions(Cell x) const;

  std::span<const int> orthogonal_neighbors(int index) const;
  std::span<const int> diagonal_neighbors(int index) const;
  MoveSet admissible_actions(int index) const { return admissible_[static_cast<std::size_t>(index)]; }
  /// Free index reached from `index` by `m`, or -1 when x + d_m is not free.
  int step(int index, Move m) const {
    return step_[static_cast<std::size_t>(index) * kMoves.size() + static_cast<std::size_t>(m)];
  }

  /// Shortest orthogonal-move distances from `from` over free cells; -1 if unreachable.
  std::vector<int> distances_from(int from) const;

 private:
  std::size_t linear(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }

  int width_;
  int height_;
  Cell goal_;
  std::vector<int> free_index_;
  std::vector<Cell> free_cells_;
  std::vector<int> step_;
  std::vector<MoveSet> admissible_;
  std::vector<int> orth_offsets_, orth_;
  std::vector<int> diag_offsets_, diag_;
};

/// One possible successor of a motion step.
struct MotionOutcome {
  int cell;  // free index
  Move direction;  // displacement from the origin cell, Stay for x' = x
  double probability;
};

/// Explicit outcome table for one (cell, action) pair of a stochastic kernel.
struct MotionEntry {
  Cell cell;
  Move action;
  std::vector<std::pair<Cell, double>> outcomes;
};

/// Robot motion kernel tau_X(x' | x, u).
///
/// Successors are restricted to x and its orthogonal free neighbours, which is
/// what lets the contamination field store five slots per cell. Pairs not
/// listed in a tabular kernel move deterministically.
class MotionKernel {
 public:
  static MotionKernel deterministic(const GridMap& map);
  static MotionKernel tabular(const GridMap& map, std::span<const MotionEntry> entries);
  /// Intended move with probability p_intended, Stay otherwise, at every non-Stay pair.
  static MotionKernel slip(const GridMap& map, double p_intended);

  bool is_deterministic() const { return deterministic_; }

  /// Successor distribution; throws ValidationError if `u` is not admissible at `cell`.
  std::span<const MotionOutcome> outcomes(int cell, Move u) const;
  double motion_prob(Cell to, Cell from, Move u) const;

 private:
  MotionKernel(const GridMap& map, bool deterministic);

  bool deterministic_;
  int width_;
  int height_;
  std::vector<int> free_index_;
  std::vector<MoveSet> admissible_;
  std::vector<std::uint32_t> offsets_;  // (cell * 5 + move) -> [offsets_[i], offsets_[i+1])
  std::vector<MotionOutcome> outcomes_;
};

}  // namespace safeplan

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bridge.hpp"
#include "oracles.hpp"
#include "safeplan/error.hpp"
#include "safeplan/gridmap.hpp"

using namespace safeplan;

namespace {

bool has(const std::vector<Cell>& v, Cell c) { return std::find(v.begin(), v.end(), c) != v.end(); }

}  // namespace

TEST_CASE("free cells are the grid minus obstacles") {
  CHECK(GridMap(2, 2, {}, {0, 0}).free_count() == 4);
  const GridMap m(2, 2, {{0, 0}}, {1, 1});
  CHECK(m.free_cells() == std::vector<Cell>{{1, 0}, {0, 1}, {1, 1}});
  CHECK(m.free_index({0, 0}) == -1);
  CHECK(m.free_index({1, 0}) == 0);
  CHECK(m.obstacles() == std::vector<Cell>{{0, 0}});
}

TEST_CASE("map construction errors") {
  CHECK_THROWS_AS(GridMap(1, 1, {{0, 0}}, {0, 0}), ValidationError);
  CHECK_THROWS_AS(GridMap(2, 2, {{0, 0}}, {0, 0}), ValidationError);
  CHECK_THROWS_AS(GridMap(2, 2, {{2, 0}}, {0, 0}), ValidationError);
  CHECK_THROWS_AS(GridMap(2, 2, {}, {5, 5}), ValidationError);
  CHECK_THROWS_AS(GridMap(0, 2, {}, {0, 0}), ValidationError);
}

TEST_CASE("orthogonal neighbours") {
  const GridMap open(5, 5, {}, {0, 0});
  CHECK(open.orthogonal_neighbors(Cell{2, 2}).size() == 4);
  CHECK(open.orthogonal_neighbors(Cell{0, 0}).size() == 2);
  const GridMap boxed(3, 3, {{1, 0}, {0, 1}, {2, 1}, {1, 2}}, {1, 1});
  CHECK(boxed.orthogonal_neighbors(Cell{1, 1}).empty());
  CHECK_THROWS_AS(boxed.orthogonal_neighbors(Cell{1, 0}), ValidationError);
  CHECK_THROWS_AS(boxed.orthogonal_neighbors(Cell{7, 0}), ValidationError);
}

TEST_CASE("diagonal neighbours") {
  const GridMap open(5, 5, {}, {0, 0});
  CHECK(open.diagonal_neighbors(Cell{2, 2}).size() == 4);
  CHECK(open.diagonal_neighbors(Cell{0, 0}) == std::vector<Cell>{{1, 1}});
  const GridMap corners(3, 3, {{0, 0}, {2, 0}, {0, 2}, {2, 2}}, {1, 1});
  CHECK(corners.diagonal_neighbors(Cell{1, 1}).empty());
  CHECK(corners.orthogonal_neighbors(Cell{1, 1}).size() == 4);
}

TEST_CASE("admissible actions") {
  const GridMap boxed(3, 3, {{1, 0}, {0, 1}, {2, 1}, {1, 2}}, {1, 1});
  CHECK(boxed.admissible_actions(Cell{1, 1}) == MoveSet(1u));
  const GridMap open(3, 3, {}, {1, 1});
  CHECK(open.admissible_actions(Cell{1, 1}).size() == 5);
  const GridMap wall(3, 3, {{1, 2}}, {1, 1});
  const MoveSet a = wall.admissible_actions(Cell{1, 1});
  CHECK(a.to_vector() == std::vector<Move>{Move::Stay, Move::East, Move::South, Move::West});
}

TEST_CASE("move names and displacements") {
  CHECK(displacement(Move::North) == Cell{0, 1});
  CHECK(displacement(Move::East) == Cell{1, 0});
  CHECK(displacement(Move::South) == Cell{0, -1});
  CHECK(displacement(Move::West) == Cell{-1, 0});
  CHECK(displacement(Move::Stay) == Cell{0, 0});
  for (Move m : kMoves) CHECK(parse_move(to_string(m)) == m);
  CHECK(parse_move("north") == Move::North);
  CHECK_FALSE(parse_move("up").has_value());
}

TEST_CASE("deterministic motion is 0/1") {
  const GridMap m(3, 3, {{1, 2}}, {0, 0});
  const MotionKernel k = MotionKernel::deterministic(m);
  CHECK(k.is_deterministic());
  CHECK(k.motion_prob({2, 1}, {1, 1}, Move::East) == 1.0);
  CHECK(k.motion_prob({1, 1}, {1, 1}, Move::East) == 0.0);
  CHECK(k.motion_prob({1, 0}, {1, 1}, Move::South) == 1.0);
  CHECK_THROWS_AS(k.motion_prob({1, 2}, {1, 1}, Move::North), ValidationError);
}

TEST_CASE("tabular motion reads back and validates") {
  const GridMap m(3, 1, {}, {2, 0});
  const std::vector<MotionEntry> entries{{{1, 0}, Move::East, {{{2, 0}, 0.9}, {{1, 0}, 0.1}}}};
  const MotionKernel k = MotionKernel::tabular(m, entries);
  CHECK_FALSE(k.is_deterministic());
  CHECK(k.motion_prob({2, 0}, {1, 0}, Move::East) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(k.motion_prob({1, 0}, {1, 0}, Move::East) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(k.motion_prob({0, 0}, {1, 0}, Move::West) == 1.0);  // unlisted pairs stay deterministic

  const std::vector<MotionEntry> bad_sum{{{1, 0}, Move::East, {{{2, 0}, 0.5}}}};
  CHECK_THROWS_AS(MotionKernel::tabular(m, bad_sum), ValidationError);
  const std::vector<MotionEntry> far{{{0, 0}, Move::East, {{{2, 0}, 1.0}}}};
  CHECK_THROWS_AS(MotionKernel::tabular(m, far), ValidationError);
  const std::vector<MotionEntry> inadmissible{{{0, 0}, Move::North, {{{0, 0}, 1.0}}}};
  CHECK_THROWS_AS(MotionKernel::tabular(m, inadmissible), ValidationError);
}

TEST_CASE("property: neighbourhoods and kernels on random maps") {
  oracle::Rng rng(20240611);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = oracle::pick(rng, 1, 6);
    const int h = oracle::pick(rng, 1, 6);
    const oracle::Grid g = oracle::random_grid(rng, w, h, w * h / 2);
    const auto ids = oracle::free_ids(g);
    const GridMap map = bridge::to_map(g, g.pt(ids[0]));
    const MotionKernel slip = MotionKernel::slip(map, oracle::uniform(rng, 0.0, 1.0));
    const MotionKernel det = MotionKernel::deterministic(map);
    CHECK(map.free_count() == ids.size());
    for (const Cell& x : map.free_cells()) {
      const auto orth = map.orthogonal_neighbors(x);
      const auto diag = map.diagonal_neighbors(x);
      for (const Cell& n : orth) {
        CHECK(map.is_free(n));
        CHECK(std::abs(n.col - x.col) + std::abs(n.row - x.row) == 1);
        CHECK_FALSE(has(diag, n));
      }
      for (const Cell& n : diag) {
        CHECK(map.is_free(n));
        CHECK(std::abs(n.col - x.col) == 1);
        CHECK(std::abs(n.row - x.row) == 1);
      }
      const MoveSet acts = map.admissible_actions(x);
      CHECK(acts.contains(Move::Stay));
      for (Move u : kMoves) {
        CHECK(acts.contains(u) == map.is_free(x + displacement(u)));
        if (!acts.contains(u)) continue;
        for (const MotionKernel* k : {&slip, &det}) {
          double total = 0.0;
          for (const auto& o : k->outcomes(map.free_index(x), u)) {
            CHECK(o.probability >= 0.0);
            CHECK(map.is_free(map.cell_at(o.cell)));
            total += o.probability;
          }
          CHECK(std::abs(total - 1.0) <= 1e-12);
        }
      }
    }
  }
}

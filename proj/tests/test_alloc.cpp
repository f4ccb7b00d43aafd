#include <doctest.h>

#include <bit>
#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "safeplan/alloc.hpp"
#include "safeplan/bounds.hpp"
#include "safeplan/error.hpp"

using namespace safeplan;

namespace {

using Table = std::vector<std::vector<double>>;  // [robot][mask]

std::unique_ptr<ObjectiveCache> cache_of(const Table& t, int tasks) {
  return std::make_unique<ObjectiveCache>(static_cast<int>(t.size()), tasks,
                                          [t](int r, TaskMask m) { return t[static_cast<std::size_t>(r)][m]; });
}

Table random_tables(oracle::Rng& rng, int robots, int tasks, double floor = 0.3) {
  Table t;
  for (int r = 0; r < robots; ++r) t.push_back(oracle::monotone_table(rng, tasks, floor));
  return t;
}

// f_r(S) = base_r * prod_{t in S} d_{r,t}
Table discount_tables(const std::vector<double>& base, const std::vector<std::vector<double>>& d) {
  const int tasks = static_cast<int>(d[0].size());
  Table t;
  for (std::size_t r = 0; r < base.size(); ++r) {
    std::vector<double> row(std::size_t{1} << tasks);
    for (TaskMask m = 0; m < row.size(); ++m) {
      double v = base[r];
      for (int k = 0; k < tasks; ++k) {
        if ((m >> k) & 1u) v *= d[r][static_cast<std::size_t>(k)];
      }
      row[m] = v;
    }
    t.push_back(row);
  }
  return t;
}

void check_bookkeeping(const GreedyResult& res, ObjectiveCache& cache) {
  const GreedyTrace& tr = res.trace;
  std::vector<double> f_before = tr.initial_f;
  for (const GreedyIteration& it : tr.iterations) {
    double product = 1.0;
    for (int r = 0; r < cache.robots(); ++r) {
      const double v = cache.value(r, it.sets_after[static_cast<std::size_t>(r)]);
      CHECK(std::abs(it.f_after[static_cast<std::size_t>(r)] - v) <= 1e-12);
      if (tr.in_product[static_cast<std::size_t>(r)]) product *= v;
    }
    CHECK(std::abs(it.objective_after - product) <= 1e-12);
    // The winning bid's product equals the objective after applying it.
    const auto win = std::find_if(it.bids.begin(), it.bids.end(), [&](const Bid& b) {
      return b.robot == it.winner && b.task == it.task;
    });
    REQUIRE(win != it.bids.end());
    CHECK(std::abs(product_after(*win, f_before, tr.in_product) - it.objective_after) <= 1e-12);
    f_before = it.f_after;
    // Reused bids must still be legal.
    for (const Bid& b : it.bids) {
      const bool listed = std::find(it.recompute.begin(), it.recompute.end(), b.robot) != it.recompute.end();
      CHECK(b.fresh == listed);
      CHECK(((it.open_before >> b.task) & 1u) == 1u);
    }
  }
}

}  // namespace

TEST_CASE("allocation helpers") {
  const Allocation a{{0b011, 0b100}};
  CHECK(a.is_partition(3));
  CHECK_FALSE(a.is_partition(4));
  CHECK_FALSE((Allocation{{0b011, 0b110}}).is_partition(3));
  CHECK(a.owners(3) == std::vector<int>{0, 0, 1});
  const GroundSet g = to_ground_set(a, 3);
  CHECK(g == ((1u << 0) | (1u << 1) | (1u << (3 + 2))));
  CHECK(robot_masks(g, 2, 3) == a.sets);
  CHECK(ground_index({2, 1}, 3) == 5);
  CHECK(ground_pair(5, 3).task == 2);
  CHECK(ground_pair(5, 3).robot == 1);
}

TEST_CASE("group success and ground extension") {
  const Table t = discount_tables({0.9, 0.8}, {{0.5, 0.7}, {0.6, 0.9}});
  auto cache = cache_of(t, 2);
  CHECK(group_success(Allocation{{0, 0}}, *cache) == 0.9 * 0.8);
  CHECK(group_success(Allocation{{0b01, 0b10}}, *cache) == doctest::Approx(0.45 * 0.72));
  CHECK(ground_extension(0, *cache) == 0.9 * 0.8);
  CHECK(ground_extension(0b1111, *cache) == doctest::Approx(0.9 * 0.35 * 0.8 * 0.54));
  CHECK_THROWS_AS(group_success(Allocation{{0}}, *cache), ValidationError);

  const Table single = discount_tables({0.7}, {{0.5}});
  auto one = cache_of(single, 1);
  CHECK(group_success(Allocation{{1}}, *one) == 0.35);

  Table zero = t;
  zero[1][0b10] = 0.0;
  auto z = cache_of(zero, 2);
  CHECK(group_success(Allocation{{0b01, 0b10}}, *z) == 0.0);
}

TEST_CASE("property: ground extension never increases when a pair is added") {
  oracle::Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const int robots = oracle::pick(rng, 1, 3);
    const int tasks = oracle::pick(rng, 1, 3);
    auto cache = cache_of(random_tables(rng, robots, tasks), tasks);
    const int w = robots * tasks;
    for (GroundSet a = 0; a < (GroundSet{1} << w); ++a) {
      for (int e = 0; e < w; ++e) {
        if ((a >> e) & 1u) continue;
        CHECK(ground_extension(a | (GroundSet{1} << e), *cache) <= ground_extension(a, *cache));
      }
    }
  }
}

TEST_CASE("auction round winner rule") {
  const std::vector<double> f{0.8, 0.5};
  const std::vector<std::uint8_t> in{1, 1};
  const std::vector<Bid> single{{1, 0, -0.1, 0.4, true}};
  CHECK(auction_round(single, f, in) == 0);

  // Robot 0 would leave 0.7 * 0.5, robot 1 would leave 0.8 * 0.45.
  const std::vector<Bid> two{{0, 0, -0.1, 0.7, true}, {1, 1, -0.05, 0.45, true}};
  CHECK(auction_round(two, f, in) == 1);
  CHECK(product_after(two[0], f, in) == doctest::Approx(0.35));
  CHECK(product_after(two[1], f, in) == doctest::Approx(0.36));

  const std::vector<double> even{0.5, 0.5};
  const std::vector<Bid> tie{{0, 1, -0.1, 0.4, true}, {1, 0, -0.1, 0.4, true}};
  CHECK(auction_round(tie, even, in) == 1);
  const std::vector<Bid> tie_robot{{1, 2, -0.1, 0.4, true}, {0, 2, -0.1, 0.4, true}};
  CHECK(auction_round(tie_robot, even, in) == 1);
  const std::vector<Bid> tie_task{{0, 2, -0.1, 0.4, true}, {0, 1, -0.1, 0.4, true}};
  CHECK(auction_round(tie_task, even, in) == 1);

  // Fewer zero factors win even against a larger nonzero product.
  const std::vector<double> fz{0.0, 0.9};
  const std::vector<Bid> zeros{{1, 0, -0.1, 0.8, true}, {0, 0, 0.2, 0.2, true}};
  CHECK(auction_round(zeros, fz, in) == 1);
  CHECK_THROWS_AS(auction_round(std::vector<Bid>{}, f, in), ValidationError);
}

TEST_CASE("forward greedy small cases") {
  const Table one = discount_tables({0.9}, {{0.5, 0.7, 0.8}});
  auto c1 = cache_of(one, 3);
  const GreedyResult r1 = forward_greedy(*c1);
  CHECK(r1.allocation.sets == std::vector<TaskMask>{0b111});
  CHECK(r1.value == c1->value(0, 0b111));
  CHECK(r1.trace.iterations.size() == 3);

  // One task: argmax_r f_r({t}) * prod_{r' != r} f_{r'}(empty).
  const Table t = discount_tables({0.9, 0.6, 0.8}, {{0.5}, {0.9}, {0.7}});
  auto c = cache_of(t, 1);
  const GreedyResult r = forward_greedy(*c);
  double best = -1.0;
  int who = -1;
  for (int k = 0; k < 3; ++k) {
    double p = 1.0;
    for (int j = 0; j < 3; ++j) p *= c->value(j, j == k ? 1u : 0u);
    if (p > best) {
      best = p;
      who = k;
    }
  }
  CHECK(r.allocation.owners(1)[0] == who);
  CHECK(r.value == doctest::Approx(best).epsilon(1e-15));

  auto c0 = cache_of({{0.9}, {0.8}}, 0);
  const GreedyResult r0 = forward_greedy(*c0);
  CHECK(r0.trace.degenerate);
  CHECK(r0.allocation.is_partition(0));
  CHECK(r0.value == doctest::Approx(0.72));
  CHECK_FALSE(r0.notes.empty());
}

TEST_CASE("forward greedy leaves out robots that cannot exit") {
  Table t = discount_tables({0.0, 0.9, 0.8}, {{0.5, 0.5}, {0.6, 0.7}, {0.9, 0.4}});
  auto c = cache_of(t, 2);
  const GreedyResult r = forward_greedy(*c);
  CHECK(r.trace.in_product == std::vector<std::uint8_t>{0, 1, 1});
  CHECK(r.allocation.sets[0] == 0);
  CHECK(r.allocation.is_partition(2));
  CHECK(r.value == 0.0);  // the reported F still includes every robot
  CHECK_FALSE(r.notes.empty());
  for (const auto& it : r.trace.iterations) {
    for (const Bid& b : it.bids) CHECK(b.robot != 0);
  }
}

TEST_CASE("reverse greedy small cases") {
  const Table one = discount_tables({0.9}, {{0.5, 0.7}});
  auto c1 = cache_of(one, 2);
  const GreedyResult r1 = reverse_greedy(*c1);
  CHECK(r1.allocation.sets == std::vector<TaskMask>{0b11});
  CHECK(r1.trace.iterations.empty());

  // |T| = 1, |R| = 2: the robot whose removal helps the group more drops it.
  const Table t = discount_tables({0.9, 0.8}, {{0.5}, {0.9}});
  auto c = cache_of(t, 1);
  const GreedyResult r = reverse_greedy(*c);
  CHECK(r.trace.iterations.size() == 1);
  CHECK(r.allocation.sets == std::vector<TaskMask>{0, 1});
  CHECK(r.trace.iterations[0].closed);
}

TEST_CASE("property: greedy auctions match centralized greedy references") {
  oracle::Rng rng(31337);
  for (int trial = 0; trial < 150; ++trial) {
    const int robots = oracle::pick(rng, 1, 4);
    const int tasks = oracle::pick(rng, 1, 5);
    const Table t = random_tables(rng, robots, tasks);
    auto cache = cache_of(t, tasks);
    const GreedyResult fg = forward_greedy(*cache, 1 + trial % 3);
    const GreedyResult rg = reverse_greedy(*cache, 1 + trial % 2);
    CHECK(fg.allocation.is_partition(tasks));
    CHECK(rg.allocation.is_partition(tasks));
    CHECK(fg.trace.iterations.size() == static_cast<std::size_t>(tasks));
    CHECK(rg.trace.iterations.size() == static_cast<std::size_t>(robots == 1 ? 0 : tasks * (robots - 1)));
    CHECK(fg.allocation.sets == oracle::central_forward(t, robots, tasks));
    CHECK(rg.allocation.sets == oracle::central_reverse(t, robots, tasks));

    // Open-set sizes and the closing rule.
    for (std::size_t k = 0; k < fg.trace.iterations.size(); ++k) {
      CHECK(std::popcount(fg.trace.iterations[k].open_after) == tasks - static_cast<int>(k) - 1);
    }
    for (const GreedyIteration& it : rg.trace.iterations) {
      int holders = 0;
      for (TaskMask s : it.sets_after) holders += (s >> it.task) & 1u;
      CHECK(it.closed == (holders == 1));
      CHECK(((it.open_after >> it.task) & 1u) == (it.closed ? 0u : 1u));
    }
    check_bookkeeping(fg, *cache);
    check_bookkeeping(rg, *cache);

    // Forward evaluation budget: f(empty) per robot plus one per candidate per recomputing robot.
    std::size_t budget = static_cast<std::size_t>(robots);
    for (const GreedyIteration& it : fg.trace.iterations) {
      budget += it.recompute.size() * (1 + static_cast<std::size_t>(std::popcount(it.open_before)));
    }
    CHECK(fg.distinct_evaluations <= budget);

    const double best = oracle::best_assignment(t, robots, tasks);
    const BruteForceResult bf = brute_force_optimal(*cache);
    CHECK(bf.value == doctest::Approx(best).epsilon(1e-14));
    CHECK(fg.value <= bf.value);
    CHECK(rg.value <= bf.value);
    CHECK(bf.allocation.is_partition(tasks));
  }
}

TEST_CASE("greedy traces are identical for every thread count") {
  oracle::Rng rng(8);
  const Table t = random_tables(rng, 4, 5);
  auto a = cache_of(t, 5);
  auto b = cache_of(t, 5);
  const GreedyResult f1 = forward_greedy(*a, 1);
  const GreedyResult f8 = forward_greedy(*b, 8);
  CHECK(f1.allocation == f8.allocation);
  REQUIRE(f1.trace.evaluations.size() == f8.trace.evaluations.size());
  for (std::size_t i = 0; i < f1.trace.evaluations.size(); ++i) {
    CHECK(f1.trace.evaluations[i].robot == f8.trace.evaluations[i].robot);
    CHECK(f1.trace.evaluations[i].tasks == f8.trace.evaluations[i].tasks);
  }
  const GreedyResult r1 = reverse_greedy(*a, 1);
  const GreedyResult r8 = reverse_greedy(*b, 8);
  CHECK(r1.allocation == r8.allocation);
  CHECK(r1.trace.evaluations.size() == r8.trace.evaluations.size());
}

TEST_CASE("brute force enumeration") {
  const Table t = discount_tables({0.9, 0.8}, {{0.5, 0.7}, {0.6, 0.9}});
  auto c = cache_of(t, 2);
  const BruteForceResult r = brute_force_optimal(*c);
  CHECK(r.candidates == 4);
  CHECK(r.value == doctest::Approx(oracle::best_assignment(t, 2, 2)));

  // All assignments tie: owner vector (0, 0) is lexicographically smallest.
  auto flat = cache_of(discount_tables({0.5, 0.5}, {{1.0, 1.0}, {1.0, 1.0}}), 2);
  CHECK(brute_force_optimal(*flat).allocation.sets == std::vector<TaskMask>{0b11, 0});

  oracle::Rng rng(3);
  auto big = cache_of(random_tables(rng, 3, 4), 4);
  CHECK_THROWS_AS(brute_force_optimal(*big, 80.0), CapExceeded);
  CHECK(brute_force_optimal(*big, 81.0).candidates == 81);
}

TEST_CASE("strict-decrease diagnostic") {
  // Task 1 is free for robot 0, so adding it leaves F unchanged.
  const Table t = discount_tables({0.9}, {{0.5, 1.0}});
  auto c = cache_of(t, 2);
  const GreedyResult r = forward_greedy(*c);
  const auto v = strict_decrease_violations(r.trace);
  REQUIRE(v.size() == 1);
  CHECK(v[0].before == v[0].after);

  oracle::Rng rng(4);
  auto strict = cache_of(random_tables(rng, 2, 3), 3);
  CHECK(strict_decrease_violations(forward_greedy(*strict).trace).empty());
  CHECK(strict_decrease_violations(reverse_greedy(*strict).trace).empty());
}

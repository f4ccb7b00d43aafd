#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safeplan/reach.hpp"

namespace safeplan {

/// Per-robot task sets, one bitmask over the scenario's target list per robot.
struct Allocation {
  std::vector<TaskMask> sets;

  /// Pairwise disjoint and covering all `tasks` targets.
  bool is_partition(int tasks) const;
  /// Robot holding each task, or -1; requires a partition.
  std::vector<int> owners(int tasks) const;

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// Subset of the ground set W = T x R. Pair (task t, robot r) is bit r * |T| + t.
using GroundSet = std::uint64_t;

struct GroundPair {
  int task;
  int robot;
};

inline int ground_index(GroundPair p, int tasks) { return p.robot * tasks + p.task; }
inline GroundPair ground_pair(int index, int tasks) { return {index % tasks, index / tasks}; }

/// Per-robot masks of a ground set.
std::vector<TaskMask> robot_masks(GroundSet a, int robots, int tasks);
GroundSet to_ground_set(const Allocation& alloc, int tasks);

/// F({T_r}) = prod_r f_r(T_r), multiplied in robot order.
double group_success(const Allocation& alloc, ObjectiveCache& cache);
/// F(A) = prod_r f_r({t | (t, r) in A}); A may give one task to several robots.
double ground_extension(GroundSet a, ObjectiveCache& cache);

struct Bid {
  int robot;
  int task;
  double delta;  // f_r(new set) - f_r(current set)
  double value;  // f_r(new set)
  bool fresh;    // computed this iteration rather than carried over
};

/// Winner of one auction round as an index into `bids`.
///
/// Bids are ranked by the group objective after applying them. The number of
/// zero factors decides first (fewer wins); with no zeros the rank is
/// delta * prod_{r' != r} f_{r'}, otherwise the product of the nonzero
/// factors. Remaining ties go to the smaller task id, then the smaller robot
/// id. Robots with in_product[r] == 0 are left out of every product.
std::size_t auction_round(std::span<const Bid> bids, std::span<const double> f,
                          std::span<const std::uint8_t> in_product);

/// Group objective over in_product robots after applying `bid`.
double product_after(const Bid& bid, std::span<const double> f,
                     std::span<const std::uint8_t> in_product);

struct Evaluation {
  int robot;
  TaskMask tasks;
  double value;
};

struct GreedyIteration {
  int k = 0;
  std::vector<int> recompute;  // R^{k-1}
  TaskMask open_before = 0;    // J^{k-1}
  std::vector<Bid> bids;       // every bid in play, fresh or reused
  int winner = -1;             // r^k
  int task = -1;               // t_{r^k}^k
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::vector<TaskMask> sets_after;
  std::vector<double> f_after;
  TaskMask open_after = 0;  // J^k
  bool closed = false;      // reverse only: the task left J^k this iteration
};

enum class GreedyKind { Forward, Reverse };

struct GreedyTrace {
  GreedyKind kind = GreedyKind::Forward;
  std::vector<TaskMask> initial_sets;
  std::vector<double> initial_f;
  std::vector<std::uint8_t> in_product;  // forward: robots with f_r(empty) = 0 are left out
  std::vector<GreedyIteration> iterations;
  std::vector<Evaluation> evaluations;  // first request of each distinct (r, mask), in order
  std::vector<std::string> notes;
  bool degenerate = false;
};

struct AllocationResult {
  Allocation allocation;
  double value = 0.0;  // F over all robots
  std::size_t distinct_evaluations = 0;
  std::vector<std::string> notes;
};

struct GreedyResult : AllocationResult {
  GreedyTrace trace;
};

/// Forward distributed greedy: start from empty sets and hand out one task per
/// iteration to the best bid. Only robots in R^{k-1} recompute their bids; bid
/// computation runs on up to `threads` threads.
GreedyResult forward_greedy(ObjectiveCache& cache, int threads = 1);

/// Reverse distributed greedy: start with every task on every robot and remove
/// one (task, robot) pair per iteration until each task has one holder.
GreedyResult reverse_greedy(ObjectiveCache& cache, int threads = 1);

inline constexpr double kDefaultBruteForceCap = 1e6;

struct BruteForceResult : AllocationResult {
  std::size_t candidates = 0;
};

/// Exhaustive maximum over the |R|^|T| labelled assignments. Ties go to the
/// lexicographically smallest owner vector (owner of task 0 first).
BruteForceResult brute_force_optimal(ObjectiveCache& cache, double cap = kDefaultBruteForceCap,
                                     int threads = 1);

/// Evaluates f_r(mask) for every robot and every task mask, in parallel.
void prefetch_all(ObjectiveCache& cache, int threads = 1);

}  // namespace safeplan

#pragma once

#include <atomic>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "safeplan/gridmap.hpp"
#include "safeplan/hazard.hpp"

namespace safeplan {

/// Bitmask over a target list; bit i is target i.
using TaskMask = std::uint32_t;

inline constexpr int kMaxTargetsPerRobot = 20;

/// State of the single-robot mission process: the absorbing hazard state, or
/// an active (visited targets, cell) pair.
struct MissionState {
  bool hazard = false;
  TaskMask visited = 0;
  int cell = -1;  // free index

  static MissionState absorbed() { return {true, 0, -1}; }
  static MissionState active(TaskMask visited, int cell) { return {false, visited, cell}; }

  friend auto operator<=>(const MissionState&, const MissionState&) = default;
};

struct StateProbability {
  MissionState state;
  double probability;
};

/// Environment shared by every single-robot plan.
struct PlanContext {
  const GridMap* map = nullptr;
  const MotionKernel* motion = nullptr;
  const ContaminationField* field = nullptr;
  const HazardModel* hazard = nullptr;  // needed only for joint-hazard rollouts
};

struct PlanQuery {
  int robot = 0;
  Cell start;
  std::vector<Cell> targets;
  int horizon = 1;
};

/// q' = q | bit(x') when x' is a target, else q.
TaskMask task_update(TaskMask visited, Cell next, std::span<const Cell> targets);

/// Values V^k(s) for k = 0..N over the active states; V^k(s_H) = 0 is implicit.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(int horizon, int targets, std::size_t cells);

  int horizon() const { return horizon_; }
  double value(int k, const MissionState& s) const;
  double& at(int k, TaskMask q, int cell) { return data_[index(k, q, cell)]; }
  double at(int k, TaskMask q, int cell) const { return data_[index(k, q, cell)]; }
  bool empty() const { return data_.empty(); }

 private:
  std::size_t index(int k, TaskMask q, int cell) const {
    return (static_cast<std::size_t>(k) * masks_ + q) * cells_ + static_cast<std::size_t>(cell);
  }
  int horizon_ = 0;
  std::size_t masks_ = 0;
  std::size_t cells_ = 0;
  std::vector<double> data_;
};

/// Control laws mu^k for k = 0..N-1.
class Policy {
 public:
  Policy() = default;
  Policy(int horizon, int targets, std::size_t cells);

  int horizon() const { return horizon_; }
  Move action(int k, const MissionState& s) const;
  Move& at(int k, TaskMask q, int cell) { return data_[index(k, q, cell)]; }
  Move at(int k, TaskMask q, int cell) const { return data_[index(k, q, cell)]; }
  bool empty() const { return data_.empty(); }

 private:
  std::size_t index(int k, TaskMask q, int cell) const {
    return (static_cast<std::size_t>(k) * masks_ + q) * cells_ + static_cast<std::size_t>(cell);
  }
  int horizon_ = 0;
  std::size_t masks_ = 0;
  std::size_t cells_ = 0;
  std::vector<Move> data_;
};

struct PlanResult {
  double success = 0.0;      // f_r(T_r) = V^0(s_r^0)
  TaskMask initial_visited = 0;
  ValueTable values;         // empty unless requested
  Policy policy;             // empty unless requested
  std::vector<std::string> diagnostics;
};

/// tau_S^k(. | s, u). Absorbing states map to themselves for any u.
std::vector<StateProbability> transition_distribution(const PlanContext& ctx,
                                                      const PlanQuery& query,
                                                      const MissionState& s, Move u, int k);

/// Backward recursion over k = N-1..0. Argmax ties go to the first action in
/// Stay, North, East, South, West order.
PlanResult dp_solve(const PlanContext& ctx, const PlanQuery& query, bool keep_tables = true);

/// Memoized f_r(T_r) keyed by (robot, task mask). Safe for concurrent use;
/// the evaluator runs outside the lock, so two threads racing on a new key
/// both compute it and the identical values collide harmlessly.
class ObjectiveCache {
 public:
  using Evaluator = std::function<double(int robot, TaskMask tasks)>;

  ObjectiveCache(int robots, int tasks, Evaluator evaluator);

  int robots() const { return robots_; }
  int tasks() const { return tasks_; }
  TaskMask all_tasks() const { return tasks_ == 0 ? 0u : (TaskMask{1} << tasks_) - 1u; }

  double value(int robot, TaskMask tasks);
  bool contains(int robot, TaskMask tasks) const;

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  static std::uint64_t key(int robot, TaskMask tasks) {
    return (static_cast<std::uint64_t>(robot) << 32u) | tasks;
  }

  int robots_;
  int tasks_;
  Evaluator evaluator_;
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, double> values_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

/// Evaluator planning robot r from starts[r] over the targets selected by the mask.
ObjectiveCache::Evaluator mission_evaluator(const PlanContext& ctx, std::vector<Cell> starts,
                                            std::vector<Cell> targets, int horizon);

/// Memoized f_r(T_r).
double success_probability(ObjectiveCache& cache, int robot, TaskMask tasks);

enum class RolloutMode { ModelConsistent, JointHazard };

struct RolloutStats {
  std::size_t trials = 0;
  std::size_t successes = 0;
  double rate = 0.0;
  double wilson_low = 0.0;  // 95% Wilson score interval
  double wilson_high = 0.0;
};

RolloutStats make_rollout_stats(std::size_t successes, std::size_t trials);

/// Executes `policy` `trials` times. ModelConsistent draws contamination per
/// step as Bernoulli(p_H^k(x', x)); JointHazard samples a full hazard
/// trajectory from ctx.hazard and fails when x^k is in y^k.
RolloutStats rollout(const PlanContext& ctx, const PlanQuery& query, const Policy& policy,
                     RolloutMode mode, std::size_t trials, std::uint64_t seed, int threads = 1);

/// All robots execute their policies under one shared hazard trajectory per
/// trial; a trial succeeds when every robot does.
RolloutStats rollout_group(const PlanContext& ctx, std::span<const PlanQuery> queries,
                           std::span<const Policy> policies, std::size_t trials,
                           std::uint64_t seed, int threads = 1);

struct PathTrace {
  std::vector<Cell> cells;    // x^0, x^1, ... up to success or the horizon
  std::vector<Move> actions;  // actions[k] moves cells[k] -> cells[k+1]
  bool reaches_goal = false;
};

/// Nominal path: follow the policy, take the most likely successor, ignore contamination.
PathTrace trace_path(const PlanContext& ctx, const PlanQuery& query, const Policy& policy);

}  // namespace safeplan

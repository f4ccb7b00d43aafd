#include "safeplan/reach.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "safeplan/error.hpp"
#include "safeplan/parallel.hpp"
#include "safeplan/rng.hpp"

namespace safeplan {

TaskMask task_update(TaskMask visited, Cell next, std::span<const Cell> targets) {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == next) visited |= TaskMask{1} << i;
  }
  return visited;
}

// ------------------------------------------------------------------ tables

ValueTable::ValueTable(int horizon, int targets, std::size_t cells)
    : horizon_(horizon), masks_(std::size_t{1} << targets), cells_(cells),
      data_(static_cast<std::size_t>(horizon + 1) * masks_ * cells, 0.0) {}

double ValueTable::value(int k, const MissionState& s) const {
  if (k < 0 || k > horizon_) throw ValidationError("value table: step out of range");
  if (s.hazard) return 0.0;
  if (s.visited >= masks_ || s.cell < 0 || static_cast<std::size_t>(s.cell) >= cells_) {
    throw ValidationError("value table: state out of range");
  }
  return at(k, s.visited, s.cell);
}

Policy::Policy(int horizon, int targets, std::size_t cells)
    : horizon_(horizon), masks_(std::size_t{1} << targets), cells_(cells),
      data_(static_cast<std::size_t>(horizon) * masks_ * cells, Move::Stay) {}

Move Policy::action(int k, const MissionState& s) const {
  if (k < 0 || k >= horizon_) throw ValidationError("policy: step out of range");
  if (s.hazard) return Move::Stay;
  if (s.visited >= masks_ || s.cell < 0 || static_cast<std::size_t>(s.cell) >= cells_) {
    throw ValidationError("policy: state out of range");
  }
  return at(k, s.visited, s.cell);
}

// ------------------------------------------------------------ mission model

namespace {

struct Mission {
  const GridMap& map;
  const MotionKernel& motion;
  const ContaminationField& field;
  int horizon;
  int start;
  int goal;
  TaskMask full;
  std::vector<TaskMask> bit_of;  // per free cell

  bool is_goal(TaskMask q, int x) const { return q == full && x == goal; }
};

Mission make_mission(const PlanContext& ctx, const PlanQuery& query) {
  if (!ctx.map || !ctx.motion || !ctx.field) {
    throw ValidationError("plan context is missing the map, motion kernel, or contamination field");
  }
  const GridMap& map = *ctx.map;
  if (query.horizon < 1) throw ValidationError("planning horizon must be at least 1");
  if (ctx.field->horizon() < query.horizon) {
    throw ValidationError("contamination field covers " + std::to_string(ctx.field->horizon()) +
                          " steps, plan needs " + std::to_string(query.horizon));
  }
  if (ctx.field->cell_count() != map.free_count()) {
    throw ValidationError("contamination field does not match the map");
  }
  if (query.targets.size() > static_cast<std::size_t>(kMaxTargetsPerRobot)) {
    throw CapExceeded("a single robot can plan for at most " +
                      std::to_string(kMaxTargetsPerRobot) + " targets");
  }
  Mission m{map, *ctx.motion, *ctx.field, query.horizon, 0, map.goal_index(),
            static_cast<TaskMask>((TaskMask{1} << query.targets.size()) - 1u),
            std::vector<TaskMask>(map.free_count(), 0)};
  if (!map.in_bounds(query.start) || !map.is_free(query.start)) {
    throw ValidationError("robot start " + to_string(query.start) + " is not a free cell");
  }
  m.start = map.free_index(query.start);
  for (std::size_t i = 0; i < query.targets.size(); ++i) {
    const Cell t = query.targets[i];
    if (!map.is_free(t)) throw ValidationError("target " + to_string(t) + " is not a free cell");
    auto& bit = m.bit_of[static_cast<std::size_t>(map.free_index(t))];
    if (bit != 0) throw ValidationError("target " + to_string(t) + " is listed twice");
    bit = TaskMask{1} << i;
  }
  return m;
}

}  // namespace

std::vector<StateProbability> transition_distribution(const PlanContext& ctx,
                                                      const PlanQuery& query,
                                                      const MissionState& s, Move u, int k) {
  const Mission m = make_mission(ctx, query);
  if (k < 0 || k >= m.horizon) throw ValidationError("transition: step out of range");
  if (s.hazard) return {{MissionState::absorbed(), 1.0}};
  if (s.cell < 0 || static_cast<std::size_t>(s.cell) >= m.map.free_count() || s.visited > m.full) {
    throw ValidationError("transition: state out of range");
  }
  if (m.is_goal(s.visited, s.cell)) return {{s, 1.0}};

  double hazard_mass = 0.0;
  std::map<MissionState, double> active;
  for (const MotionOutcome& o : m.motion.outcomes(s.cell, u)) {
    const double ph = m.field.prob(k, s.cell, o.direction);
    hazard_mass += ph * o.probability;
    const TaskMask q = s.visited | m.bit_of[static_cast<std::size_t>(o.cell)];
    active[MissionState::active(q, o.cell)] += (1.0 - ph) * o.probability;
  }
  std::vector<StateProbability> out;
  if (hazard_mass > 0.0) out.push_back({MissionState::absorbed(), hazard_mass});
  for (const auto& [state, p] : active) {
    if (p > 0.0) out.push_back({state, p});
  }
  return out;
}

PlanResult dp_solve(const PlanContext& ctx, const PlanQuery& query, bool keep_tables) {
  const Mission m = make_mission(ctx, query);
  const GridMap& map = m.map;
  const std::size_t n = map.free_count();
  const int targets = static_cast<int>(query.targets.size());
  const std::size_t masks = std::size_t{1} << targets;

  PlanResult result;
  result.initial_visited = m.bit_of[static_cast<std::size_t>(m.start)];

  const std::vector<int> dist = map.distances_from(m.start);
  for (const Cell& t : query.targets) {
    const int ti = map.free_index(t);
    if (dist[static_cast<std::size_t>(ti)] < 0) {
      result.diagnostics.push_back("target " + to_string(t) + " is unreachable from " +
                                   to_string(query.start));
    }
    if (m.field.flagged(0, ti)) {
      result.diagnostics.push_back("target " + to_string(t) + " is contaminated at step 0");
    }
  }
  if (dist[static_cast<std::size_t>(m.goal)] < 0) {
    result.diagnostics.push_back("goal is unreachable from " + to_string(query.start));
  }
  const bool start_contaminated = m.field.flagged(0, m.start);
  if (start_contaminated) {
    result.diagnostics.push_back("start " + to_string(query.start) + " is contaminated at step 0");
    if (!keep_tables) return result;
  }

  if (keep_tables) {
    result.values = ValueTable(m.horizon, targets, n);
    result.policy = Policy(m.horizon, targets, n);
  }
  std::vector<double> next(masks * n, 0.0);
  std::vector<double> cur(masks * n, 0.0);
  next[m.full * n + static_cast<std::size_t>(m.goal)] = 1.0;
  if (keep_tables) result.values.at(m.horizon, m.full, m.goal) = 1.0;

  for (int k = m.horizon - 1; k >= 0; --k) {
    for (std::size_t q = 0; q < masks; ++q) {
      for (std::size_t x = 0; x < n; ++x) {
        const TaskMask bit = m.bit_of[x];
        double best = 0.0;
        Move best_u = Move::Stay;
        if (bit != 0 && (q & bit) == 0) {
          // (q, x) with x an unvisited target is not a state of the process.
        } else if (m.is_goal(static_cast<TaskMask>(q), static_cast<int>(x))) {
          best = 1.0;
        } else {
          best = -1.0;
          const MoveSet allowed = map.admissible_actions(static_cast<int>(x));
          for (Move u : kMoves) {
            if (!allowed.contains(u)) continue;
            double v = 0.0;
            for (const MotionOutcome& o : m.motion.outcomes(static_cast<int>(x), u)) {
              const double survive = 1.0 - m.field.prob(k, static_cast<int>(x), o.direction);
              const std::size_t q2 = q | m.bit_of[static_cast<std::size_t>(o.cell)];
              v += o.probability * survive * next[q2 * n + static_cast<std::size_t>(o.cell)];
            }
            if (v > best) {
              best = v;
              best_u = u;
            }
          }
        }
        cur[q * n + x] = best;
        if (keep_tables) {
          result.values.at(k, static_cast<TaskMask>(q), static_cast<int>(x)) = best;
          result.policy.at(k, static_cast<TaskMask>(q), static_cast<int>(x)) = best_u;
        }
      }
    }
    std::swap(cur, next);
  }
  const double v0 = next[result.initial_visited * n + static_cast<std::size_t>(m.start)];
  if (!(v0 >= 0.0 && v0 <= 1.0 + 1e-12)) {
    throw NumericViolation("dynamic programming produced value " + std::to_string(v0));
  }
  result.success = start_contaminated ? 0.0 : std::min(v0, 1.0);
  return result;
}

// ------------------------------------------------------------------- cache

ObjectiveCache::ObjectiveCache(int robots, int tasks, Evaluator evaluator)
    : robots_(robots), tasks_(tasks), evaluator_(std::move(evaluator)) {
  if (robots < 1) throw ValidationError("objective needs at least one robot");
  if (tasks < 0 || tasks > 31) throw CapExceeded("objective supports at most 31 tasks");
}

double ObjectiveCache::value(int robot, TaskMask tasks) {
  if (robot < 0 || robot >= robots_) throw ValidationError("robot index out of range");
  if ((tasks & ~all_tasks()) != 0) throw ValidationError("task mask out of range");
  const std::uint64_t k = key(robot, tasks);
  {
    std::lock_guard lock(mutex_);
    if (auto it = values_.find(k); it != values_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const double v = evaluator_(robot, tasks);
  if (!(v >= 0.0 && v <= 1.0)) {
    throw NumericViolation("objective value " + std::to_string(v) + " outside [0,1]");
  }
  ++misses_;
  std::lock_guard lock(mutex_);
  values_.insert_or_assign(k, v);
  return v;
}

bool ObjectiveCache::contains(int robot, TaskMask tasks) const {
  std::lock_guard lock(mutex_);
  return values_.contains(key(robot, tasks));
}

ObjectiveCache::Evaluator mission_evaluator(const PlanContext& ctx, std::vector<Cell> starts,
                                            std::vector<Cell> targets, int horizon) {
  return [ctx, starts = std::move(starts), targets = std::move(targets), horizon](int robot,
                                                                                  TaskMask tasks) {
    PlanQuery q;
    q.robot = robot;
    q.start = starts.at(static_cast<std::size_t>(robot));
    q.horizon = horizon;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if ((tasks >> i) & 1u) q.targets.push_back(targets[i]);
    }
    return dp_solve(ctx, q, false).success;
  };
}

double success_probability(ObjectiveCache& cache, int robot, TaskMask tasks) {
  return cache.value(robot, tasks);
}

// ---------------------------------------------------------------- rollouts

RolloutStats make_rollout_stats(std::size_t successes, std::size_t trials) {
  RolloutStats s;
  s.trials = trials;
  s.successes = successes;
  if (trials == 0) return s;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  constexpr double z = 1.959963984540054;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  s.rate = p;
  s.wilson_low = std::max(0.0, center - half);
  s.wilson_high = std::min(1.0, center + half);
  return s;
}

namespace {

const MotionOutcome& draw_outcome(std::span<const MotionOutcome> outcomes, Engine& rng) {
  if (outcomes.size() == 1) return outcomes.front();
  const double u = uniform01(rng);
  double acc = 0.0;
  for (const MotionOutcome& o : outcomes) {
    acc += o.probability;
    if (u < acc) return o;
  }
  return outcomes.back();
}

void check_policy(const Mission& m, const Policy& policy, const PlanQuery& query) {
  if (policy.empty() || policy.horizon() < m.horizon) {
    throw ValidationError("policy does not cover the planning horizon");
  }
  (void)policy.action(0, MissionState::active(m.full, m.start));
  (void)query;
}

/// Robot progress inside one rollout trial.
struct Walker {
  TaskMask q;
  int x;
  bool done = false;     // reached the goal state
  bool failed = false;   // absorbed in the hazard state
};

}  // namespace

RolloutStats rollout(const PlanContext& ctx, const PlanQuery& query, const Policy& policy,
                     RolloutMode mode, std::size_t trials, std::uint64_t seed, int threads) {
  const Mission m = make_mission(ctx, query);
  check_policy(m, policy, query);
  if (mode == RolloutMode::JointHazard && !ctx.hazard) {
    throw ValidationError("joint-hazard rollouts need the hazard model");
  }
  const TaskMask q0 = m.bit_of[static_cast<std::size_t>(m.start)];
  const std::size_t workers = worker_count(trials, threads);
  std::vector<std::size_t> wins(workers, 0);

  parallel_blocks(trials, threads, [&](std::size_t begin, std::size_t end, std::size_t w) {
    for (std::size_t t = begin; t < end; ++t) {
      Engine rng = make_stream(seed, t);
      Walker r{q0, m.start};
      CellSet y;
      if (mode == RolloutMode::JointHazard) {
        y = ctx.hazard->initial();
        r.failed = y.contains(m.start);
      } else {
        r.failed = m.field.flagged(0, m.start);
      }
      for (int k = 0; k < m.horizon && !r.failed; ++k) {
        if (m.is_goal(r.q, r.x)) break;
        const Move u = policy.at(k, r.q, r.x);
        const MotionOutcome& o = draw_outcome(m.motion.outcomes(r.x, u), rng);
        if (mode == RolloutMode::ModelConsistent) {
          const double ph = m.field.prob(k, r.x, o.direction);
          if (ph > 0.0 && uniform01(rng) < ph) r.failed = true;
        } else {
          y = hazard_step_sample(m.map, *ctx.hazard, y, rng);
          if (y.contains(o.cell)) r.failed = true;
        }
        r.x = o.cell;
        r.q |= m.bit_of[static_cast<std::size_t>(o.cell)];
      }
      if (!r.failed && m.is_goal(r.q, r.x)) ++wins[w];
    }
  });
  return make_rollout_stats(std::accumulate(wins.begin(), wins.end(), std::size_t{0}), trials);
}

RolloutStats rollout_group(const PlanContext& ctx, std::span<const PlanQuery> queries,
                           std::span<const Policy> policies, std::size_t trials,
                           std::uint64_t seed, int threads) {
  if (!ctx.hazard) throw ValidationError("group rollouts need the hazard model");
  if (queries.size() != policies.size() || queries.empty()) {
    throw ValidationError("group rollout needs one policy per robot");
  }
  std::vector<Mission> missions;
  int horizon = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    missions.push_back(make_mission(ctx, queries[i]));
    check_policy(missions.back(), policies[i], queries[i]);
    horizon = std::max(horizon, queries[i].horizon);
  }
  const std::size_t workers = worker_count(trials, threads);
  std::vector<std::size_t> wins(workers, 0);

  parallel_blocks(trials, threads, [&](std::size_t begin, std::size_t end, std::size_t w) {
    std::vector<Walker> robots;
    for (std::size_t t = begin; t < end; ++t) {
      Engine rng = make_stream(seed, t);
      CellSet y = ctx.hazard->initial();
      robots.clear();
      bool lost = false;
      for (const Mission& m : missions) {
        robots.push_back({m.bit_of[static_cast<std::size_t>(m.start)], m.start});
        lost = lost || y.contains(m.start);
      }
      for (int k = 0; k < horizon && !lost; ++k) {
        bool all_done = true;
        for (std::size_t i = 0; i < robots.size(); ++i) {
          Walker& r = robots[i];
          const Mission& m = missions[i];
          if (m.is_goal(r.q, r.x)) r.done = true;
          if (r.done || k >= m.horizon) continue;
          all_done = false;
          const Move u = policies[i].at(k, r.q, r.x);
          const MotionOutcome& o = draw_outcome(m.motion.outcomes(r.x, u), rng);
          r.x = o.cell;
          r.q |= m.bit_of[static_cast<std::size_t>(o.cell)];
        }
        if (all_done) break;
        y = hazard_step_sample(*ctx.map, *ctx.hazard, y, rng);
        for (Walker& r : robots) {
          if (!r.done && y.contains(r.x)) lost = true;
        }
      }
      if (lost) continue;
      bool success = true;
      for (std::size_t i = 0; i < robots.size(); ++i) {
        success = success && missions[i].is_goal(robots[i].q, robots[i].x);
      }
      if (success) ++wins[w];
    }
  });
  return make_rollout_stats(std::accumulate(wins.begin(), wins.end(), std::size_t{0}), trials);
}

PathTrace trace_path(const PlanContext& ctx, const PlanQuery& query, const Policy& policy) {
  const Mission m = make_mission(ctx, query);
  check_policy(m, policy, query);
  PathTrace trace;
  TaskMask q = m.bit_of[static_cast<std::size_t>(m.start)];
  int x = m.start;
  trace.cells.push_back(m.map.cell_at(x));
  for (int k = 0; k < m.horizon && !m.is_goal(q, x); ++k) {
    const Move u = policy.at(k, q, x);
    const auto outcomes = m.motion.outcomes(x, u);
    const MotionOutcome* likely = &outcomes.front();
    for (const MotionOutcome& o : outcomes) {
      if (o.probability > likely->probability) likely = &o;
    }
    x = likely->cell;
    q |= m.bit_of[static_cast<std::size_t>(x)];
    trace.actions.push_back(u);
    trace.cells.push_back(m.map.cell_at(x));
  }
  trace.reaches_goal = m.is_goal(q, x);
  return trace;
}

}  // namespace safeplan

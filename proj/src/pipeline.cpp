#include "safeplan/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "safeplan/error.hpp"
#include "safeplan/rng.hpp"

namespace safeplan {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

// --------------------------------------------------------------- workspace

namespace {

HazardEstimate build_estimate(const Scenario& s, const GridMap& map, const HazardModel& hazard,
                              const std::string& hash, std::size_t samples, std::uint64_t seed,
                              const FieldOptions& options, bool& from_cache, double& seconds) {
  const auto start = Clock::now();
  if (options.exact) {
    HazardEstimate est{exact_contamination_field(map, hazard, s.horizon, s.caps.exact_hazard_cells),
                       exact_contamination_marginals(map, hazard, s.horizon, s.caps.exact_hazard_cells),
                       0};
    seconds = seconds_since(start);
    return est;
  }
  const FieldCacheKey key{hash, s.horizon, samples, seed};
  std::filesystem::path file;
  if (options.cache_dir) {
    file = *options.cache_dir / field_cache_filename(key);
    if (auto cached = load_hazard_estimate(file, key, map)) {
      from_cache = true;
      seconds = seconds_since(start);
      return std::move(*cached);
    }
  }
  HazardEstimate est = estimate_hazard(map, hazard, s.horizon, samples, seed, options.threads);
  if (options.cache_dir) {
    std::filesystem::create_directories(*options.cache_dir);
    save_hazard_estimate(file, key, est);
  }
  seconds = seconds_since(start);
  return est;
}

}  // namespace

Workspace::Workspace(Scenario scenario, const FieldOptions& options)
    : scenario_(std::move(scenario)),
      hash_(scenario_hash(scenario_)),
      samples_(options.samples.value_or(scenario_.samples)),
      seed_(options.seed.value_or(scenario_.seed)),
      exact_(options.exact),
      map_(scenario_.make_map()),
      motion_(scenario_.make_motion(map_)),
      hazard_(scenario_.make_hazard(map_)),
      estimate_(build_estimate(scenario_, map_, hazard_, hash_, samples_, seed_, options,
                               from_cache_, field_seconds_)) {}

PlanQuery Workspace::query(int robot, TaskMask tasks) const {
  PlanQuery q;
  q.robot = robot;
  q.start = scenario_.robots.at(static_cast<std::size_t>(robot)).start;
  q.horizon = scenario_.horizon;
  for (std::size_t i = 0; i < scenario_.targets.size(); ++i) {
    if ((tasks >> i) & 1u) q.targets.push_back(scenario_.targets[i].cell);
  }
  return q;
}

std::unique_ptr<ObjectiveCache> Workspace::make_cache() const {
  return std::make_unique<ObjectiveCache>(
      static_cast<int>(scenario_.robots.size()), static_cast<int>(scenario_.targets.size()),
      mission_evaluator(context(), scenario_.starts(), scenario_.target_cells(), scenario_.horizon));
}

std::vector<std::string> scenario_diagnostics(const Workspace& ws) {
  std::vector<std::string> out;
  const Scenario& s = ws.scenario();
  const GridMap& map = ws.map();
  for (const RobotSpec& r : s.robots) {
    const int start = map.free_index(r.start);
    const std::vector<int> dist = map.distances_from(start);
    if (dist[static_cast<std::size_t>(map.goal_index())] < 0) {
      out.push_back("robot " + r.name + " cannot reach the exit");
    }
    for (const TargetSpec& t : s.targets) {
      if (dist[static_cast<std::size_t>(map.free_index(t.cell))] < 0) {
        out.push_back("target " + t.label + " is unreachable for robot " + r.name);
      }
    }
    if (ws.field().flagged(0, start)) out.push_back("robot " + r.name + " starts in the hazard");
  }
  for (const TargetSpec& t : s.targets) {
    if (ws.field().flagged(0, map.free_index(t.cell))) {
      out.push_back("target " + t.label + " is contaminated at the start");
    }
  }
  return out;
}

const MethodOutcome* PipelineResult::method(const std::string& name) const {
  for (const MethodOutcome& m : methods) {
    if (m.method == name) return &m;
  }
  return nullptr;
}

// ---------------------------------------------------------------- pipeline

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const CapExceeded*>(&e)) return kExitCapExceeded;
  if (dynamic_cast<const NumericViolation*>(&e)) return kExitNumeric;
  return kExitFailure;
}

/// Policies for the allocation, then rollouts and nominal paths as requested.
void attach_execution(const Workspace& ws, const PipelineOptions& options, std::uint64_t salt,
                      MethodOutcome& m) {
  if (options.rollout_trials == 0 && !options.paths) return;
  const PlanContext ctx = ws.context();
  std::vector<PlanQuery> queries;
  std::vector<Policy> policies;
  for (std::size_t r = 0; r < m.allocation.sets.size(); ++r) {
    queries.push_back(ws.query(static_cast<int>(r), m.allocation.sets[r]));
    policies.push_back(dp_solve(ctx, queries.back(), true).policy);
  }
  if (options.paths) {
    for (std::size_t r = 0; r < queries.size(); ++r) {
      m.paths.push_back(trace_path(ctx, queries[r], policies[r]));
    }
  }
  if (options.rollout_trials == 0) return;
  const std::uint64_t seed = stream_seed(ws.seed(), salt);
  if (options.rollout_mode == RolloutMode::JointHazard) {
    m.group_rollout = rollout_group(ctx, queries, policies, options.rollout_trials, seed,
                                    options.threads);
  } else {
    for (std::size_t r = 0; r < queries.size(); ++r) {
      m.robot_rollouts.push_back(rollout(ctx, queries[r], policies[r], RolloutMode::ModelConsistent,
                                         options.rollout_trials, stream_seed(seed, r),
                                         options.threads));
    }
  }
}

template <typename Run>
MethodOutcome run_method(const std::string& name, ObjectiveCache& cache, Run&& run) {
  MethodOutcome m;
  m.method = name;
  const std::size_t misses_before = cache.misses();
  const auto start = Clock::now();
  try {
    run(m);
    m.ok = true;
    for (std::size_t r = 0; r < m.allocation.sets.size(); ++r) {
      m.robot_values.push_back(cache.value(static_cast<int>(r), m.allocation.sets[r]));
    }
  } catch (const std::exception& e) {
    m.ok = false;
    m.error = e.what();
    m.exit_code = exit_code_for(e);
  }
  m.wall_clock_s = seconds_since(start);
  m.plan_solves = cache.misses() - misses_before;
  return m;
}

}  // namespace

PipelineResult run_pipeline(const Workspace& ws, const PipelineOptions& options) {
  const auto start = Clock::now();
  const Scenario& s = ws.scenario();
  PipelineResult res;
  res.scenario_hash = ws.hash();
  res.seed = ws.seed();
  res.samples = ws.field_exact() ? 0 : ws.samples();
  res.field_exact = ws.field_exact();
  res.flagged = ws.field().flagged_count();
  res.diagnostics = scenario_diagnostics(ws);

  const std::unique_ptr<ObjectiveCache> cache = ws.make_cache();
  const int robots = cache->robots();
  const int tasks = cache->tasks();

  auto greedy = [&](const std::string& name, auto algorithm, std::uint64_t salt) {
    MethodOutcome m = run_method(name, *cache, [&](MethodOutcome& out) {
      GreedyResult g = algorithm(*cache, options.threads);
      out.allocation = g.allocation;
      out.value = g.value;
      out.plan_requests = g.distinct_evaluations;
      out.notes = g.notes;
      out.strictness = strict_decrease_violations(g.trace);
      out.trace = std::move(g.trace);
    });
    if (m.ok) {
      try {
        attach_execution(ws, options, salt, m);
      } catch (const std::exception& e) {
        m.notes.push_back(std::string("execution checks failed: ") + e.what());
      }
    }
    res.methods.push_back(std::move(m));
  };
  if (options.forward) greedy("forward", forward_greedy, 1);
  if (options.reverse) greedy("reverse", reverse_greedy, 2);
  if (options.brute) {
    MethodOutcome m = run_method("brute", *cache, [&](MethodOutcome& out) {
      BruteForceResult b = brute_force_optimal(*cache, s.caps.brute_force, options.threads);
      out.allocation = b.allocation;
      out.value = b.value;
      out.plan_requests = b.distinct_evaluations;
      out.notes = b.notes;
    });
    if (m.ok) {
      try {
        attach_execution(ws, options, 3, m);
      } catch (const std::exception& e) {
        m.notes.push_back(std::string("execution checks failed: ") + e.what());
      }
    }
    res.methods.push_back(std::move(m));
  }

  // Endpoints of the two greedy chains.
  res.f_empty = group_success(Allocation{std::vector<TaskMask>(static_cast<std::size_t>(robots), 0)}, *cache);
  res.f_full = group_success(
      Allocation{std::vector<TaskMask>(static_cast<std::size_t>(robots), cache->all_tasks())}, *cache);

  const int w = robots * tasks;
  if (options.exact_ratios) {
    if (w == 0) {
      res.exact_skipped = "no targets";
    } else if (w > 30 || exact_ratio_work(w) > s.caps.exact_ratio_work) {
      res.exact_skipped = "exact ratio enumeration over " + std::to_string(w) +
                          " ground pairs exceeds the cap";
    } else {
      try {
        res.exact = exact_ratios(*cache, options.feasible_only, s.caps.exact_ratio_work, options.threads);
      } catch (const std::exception& e) {
        res.exact_skipped = e.what();
      }
    }
  }
  if (options.greedy_ratios && tasks > 0) {
    std::vector<GreedyTrace> traces;
    for (const MethodOutcome& m : res.methods) {
      if (m.ok && m.trace) traces.push_back(*m.trace);
    }
    if (!traces.empty()) res.greedy = greedy_ratios(traces, robots, tasks, options.feasible_only);
  }

  const MethodOutcome* fg = res.method("forward");
  const MethodOutcome* rg = res.method("reverse");
  const MethodOutcome* bf = res.method("brute");
  if (res.exact && fg && fg->ok && rg && rg->ok && bf && bf->ok) {
    res.guarantees = evaluate_guarantees(res.f_empty, res.f_full, bf->value, fg->value, rg->value,
                                         res.exact->alpha, res.exact->gamma);
  }
  res.wall_clock_s = seconds_since(start);
  return res;
}

// ------------------------------------------------------------------ report

namespace {

json cell_json(Cell c) { return json::array({c.col, c.row}); }

json labels_json(TaskMask mask, const Scenario& s) {
  json out = json::array();
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    if ((mask >> i) & 1u) out.push_back(s.targets[i].label);
  }
  return out;
}

json ground_json(GroundSet a, const Scenario& s) {
  const int tasks = static_cast<int>(s.targets.size());
  json out = json::array();
  for (int i = 0; i < 64 && (a >> i) != 0; ++i) {
    if (!((a >> i) & 1u)) continue;
    const GroundPair p = ground_pair(i, tasks);
    out.push_back(json::array({s.targets[static_cast<std::size_t>(p.task)].label,
                               s.robots[static_cast<std::size_t>(p.robot)].name}));
  }
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json allocation_json(const Allocation& a, const Scenario& s) {
  json out = json::object();
  for (std::size_t r = 0; r < a.sets.size(); ++r) out[s.robots[r].name] = labels_json(a.sets[r], s);
  return out;
}

json trace_json(const GreedyTrace& t, const Scenario& s) {
  json out;
  out["kind"] = t.kind == GreedyKind::Forward ? "forward" : "reverse";
  out["initial_f"] = t.initial_f;
  json excluded = json::array();
  for (std::size_t r = 0; r < t.in_product.size(); ++r) {
    if (!t.in_product[r]) excluded.push_back(s.robots[r].name);
  }
  out["excluded"] = excluded;
  json iterations = json::array();
  for (const GreedyIteration& it : t.iterations) {
    json bids = json::array();
    for (const Bid& b : it.bids) {
      bids.push_back({{"robot", s.robots[static_cast<std::size_t>(b.robot)].name},
                      {"task", s.targets[static_cast<std::size_t>(b.task)].label},
                      {"delta", b.delta},
                      {"value", b.value},
                      {"fresh", b.fresh}});
    }
    json recompute = json::array();
    for (int r : it.recompute) recompute.push_back(s.robots[static_cast<std::size_t>(r)].name);
    json entry{{"k", it.k},
               {"recompute", recompute},
               {"open_before", labels_json(it.open_before, s)},
               {"bids", bids},
               {"winner", s.robots[static_cast<std::size_t>(it.winner)].name},
               {"task", s.targets[static_cast<std::size_t>(it.task)].label},
               {"objective_before", it.objective_before},
               {"objective_after", it.objective_after},
               {"f_after", it.f_after},
               {"open_after", labels_json(it.open_after, s)}};
    if (t.kind == GreedyKind::Reverse) entry["closed"] = it.closed;
    iterations.push_back(std::move(entry));
  }
  out["iterations"] = std::move(iterations);
  out["evaluations"] = t.evaluations.size();
  out["notes"] = t.notes;
  return out;
}

}  // namespace

json to_json(const RolloutStats& r) {
  return {{"trials", r.trials}, {"successes", r.successes}, {"rate", r.rate},
          {"wilson_low", r.wilson_low}, {"wilson_high", r.wilson_high}};
}

json to_json(const RatioReport& r, const Scenario& s) {
  json out{{"kind", to_string(r.kind)},
           {"alpha", r.alpha},
           {"gamma", r.gamma},
           {"triples", r.triples},
           {"alpha_skipped", r.alpha_skipped},
           {"gamma_skipped", r.gamma_skipped},
           {"clamped", r.clamped},
           {"nonmonotone", r.nonmonotone},
           {"feasible_only", r.feasible_only},
           {"insufficient", r.insufficient},
           {"notes", r.notes}};
  auto witness = [&](const std::optional<Triple>& t) -> json {
    if (!t) return nullptr;
    return {{"A", ground_json(t->a, s)},
            {"B", ground_json(t->b, s)},
            {"e", ground_json(GroundSet{1} << t->e, s)[0]}};
  };
  out["alpha_witness"] = witness(r.alpha_witness);
  out["gamma_witness"] = witness(r.gamma_witness);
  return out;
}

json to_json(const GuaranteeReport& g) {
  return {{"F_empty", g.f_empty},
          {"F_full", g.f_full},
          {"F_star", g.f_star},
          {"F_fg", g.f_fg},
          {"F_rg", g.f_rg},
          {"alpha", g.alpha},
          {"gamma", g.gamma},
          {"vacuous", g.vacuous},
          {"vacuous_reason", g.vacuous_reason},
          {"g_fg", optional_number(g.g_fg)},
          {"g_rg", optional_number(g.g_rg)},
          {"bound_fg", optional_number(g.bound_fg)},
          {"bound_rg", optional_number(g.bound_rg)},
          {"fg_inequality", {{"lhs", g.fg_inequality_lhs}, {"rhs", g.fg_inequality_rhs}, {"holds", g.fg_inequality_holds}}},
          {"rg_inequality", {{"lhs", g.rg_inequality_lhs}, {"rhs", g.rg_inequality_rhs}, {"holds", g.rg_inequality_holds}}},
          {"fg_below_optimum", g.fg_below_optimum},
          {"rg_below_optimum", g.rg_below_optimum}};
}

json report_json(const PipelineResult& res, const Workspace& ws) {
  const Scenario& s = ws.scenario();
  json out;
  out["tool_version"] = kToolVersion;
  out["scenario"] = s.name;
  out["scenario_hash"] = res.scenario_hash;
  out["seed"] = res.seed;
  out["horizon"] = s.horizon;
  out["field"] = {{"source", res.field_exact ? "exact" : "monte-carlo"},
                  {"samples", res.samples},
                  {"flagged", res.flagged},
                  {"wall_clock_s", ws.field_wall_clock_s()}};
  out["F_empty"] = res.f_empty;
  out["F_full"] = res.f_full;

  json methods = json::object();
  for (const MethodOutcome& m : res.methods) {
    json entry{{"ok", m.ok}, {"wall_clock_s", m.wall_clock_s}};
    if (!m.ok) {
      entry["error"] = m.error;
      entry["exit_code"] = m.exit_code;
      methods[m.method] = std::move(entry);
      continue;
    }
    entry["allocation"] = allocation_json(m.allocation, s);
    entry["F"] = m.value;
    entry["robot_f"] = m.robot_values;
    entry["plan_requests"] = m.plan_requests;
    entry["plan_solves"] = m.plan_solves;
    entry["notes"] = m.notes;
    if (m.trace) {
      entry["trace"] = trace_json(*m.trace, s);
      json strict = json::array();
      for (const MonotonicityViolation& v : m.strictness) {
        strict.push_back({{"k", v.k}, {"before", v.before}, {"after", v.after}});
      }
      entry["non_strict_steps"] = std::move(strict);
    }
    if (m.group_rollout) entry["rollout_joint"] = to_json(*m.group_rollout);
    if (!m.robot_rollouts.empty()) {
      json per_robot = json::object();
      for (std::size_t r = 0; r < m.robot_rollouts.size(); ++r) {
        per_robot[s.robots[r].name] = to_json(m.robot_rollouts[r]);
      }
      entry["rollout_model"] = std::move(per_robot);
    }
    if (!m.paths.empty()) {
      json paths = json::object();
      for (std::size_t r = 0; r < m.paths.size(); ++r) {
        json cells = json::array();
        for (Cell c : m.paths[r].cells) cells.push_back(cell_json(c));
        json actions = json::array();
        for (Move a : m.paths[r].actions) actions.push_back(std::string(to_string(a)));
        paths[s.robots[r].name] = {{"cells", cells}, {"actions", actions},
                                   {"reaches_goal", m.paths[r].reaches_goal}};
      }
      entry["paths"] = std::move(paths);
    }
    methods[m.method] = std::move(entry);
  }
  out["methods"] = std::move(methods);

  json ratios = json::object();
  if (res.exact) ratios["exact"] = to_json(*res.exact, s);
  if (!res.exact_skipped.empty()) ratios["exact_skipped"] = res.exact_skipped;
  if (res.greedy) ratios["greedy"] = to_json(*res.greedy, s);
  out["ratios"] = std::move(ratios);
  out["guarantees"] = res.guarantees ? to_json(*res.guarantees) : json(nullptr);
  out["diagnostics"] = res.diagnostics;
  out["wall_clock_s"] = res.wall_clock_s;
  return out;
}

json strip_wall_clock(json report) {
  if (report.is_object()) {
    report.erase("wall_clock_s");
    for (auto& [key, value] : report.items()) {
      (void)key;
      value = strip_wall_clock(std::move(value));
    }
  } else if (report.is_array()) {
    for (auto& v : report) v = strip_wall_clock(std::move(v));
  }
  return report;
}

}  // namespace safeplan

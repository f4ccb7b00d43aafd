// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bridge.hpp"
#include "oracles.hpp"
#include "safeplan/alloc.hpp"
#include "safeplan/bounds.hpp"
#include "safeplan/hazard.hpp"
#include "safeplan/pipeline.hpp"
#include "safeplan/reach.hpp"

using namespace safeplan;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %s  %s: %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Extra robot starts on free cells of an oracle instance.
std::vector<Cell> starts_for(oracle::Rng& rng, const oracle::Instance& in, int robots) {
  std::vector<Cell> out{bridge::cell(in.start)};
  const auto ids = oracle::free_ids(in.grid);
  while (static_cast<int>(out.size()) < robots) {
    out.push_back(bridge::cell(in.grid.pt(ids[static_cast<std::size_t>(oracle::pick(rng, 0, static_cast<int>(ids.size()) - 1))])));
  }
  return out;
}

Outcome dp_oracle() {
  // Instances with f in {0, 1} are checked too but do not count toward the quota.
  oracle::Rng rng(70001);
  int n = 0;
  int interior = 0;
  double worst = 0.0;
  while (interior < 60 && n < 20000) {
    const oracle::Instance in = oracle::random_instance(rng, 9, 2, 2, 3, 5, 0.4);
    const auto world = bridge::exact_world(in);
    const oracle::Field ref = oracle::exact_field(in.grid, in.sources, in.fallback, in.horizon);
    const double lib = dp_solve(world->context(), bridge::query(in), false).success;
    const double expect = oracle::sequence_value(in.grid, in.start, in.targets, in.goal, in.horizon, ref);
    worst = std::max(worst, std::abs(lib - expect));
    if (expect > 0.0 && expect < 1.0) ++interior;
    ++n;
  }
  return {worst <= 1e-10 && interior >= 50,
          fmt("%d instances, %d with 0 < f < 1, max |dp - oracle| = %.2e", n, interior, worst)};
}

Outcome hazard_exactness() {
  oracle::Rng rng(70002);
  const std::size_t samples = 100000;
  const double band = 3.0 * std::sqrt(0.25 / static_cast<double>(samples));
  double worst = 0.0;
  int maps = 0;
  for (; maps < 6; ++maps) {
    const oracle::Instance in = oracle::random_instance(rng, 12, 0, 3, 4, 6, 0.1);
    const GridMap map = bridge::to_map(in.grid, in.goal);
    const HazardModel h = bridge::to_hazard(map, in.sources, in.fallback);
    const ContaminationField exact = exact_contamination_field(map, h, in.horizon);
    const HazardEstimate est = estimate_hazard(map, h, in.horizon, samples, 100 + static_cast<std::uint64_t>(maps));
    worst = std::max(worst, est.field.max_abs_difference(exact));
  }
  return {worst <= band, fmt("%d maps, M = %zu, max sup-norm gap %.5f, band %.5f", maps, samples, worst, band)};
}

Outcome monotonicity() {
  oracle::Rng rng(70003);
  long pairs = 0;
  long ground_pairs = 0;
  long violations = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const oracle::Instance in = oracle::random_instance(rng, 10, 3, 2, 3, 8, 0.4);
    const auto world = bridge::exact_world(in);
    const int robots = oracle::pick(rng, 1, 2);
    const auto starts = starts_for(rng, in, robots);
    const int tasks = static_cast<int>(in.targets.size());
    ObjectiveCache cache(robots, tasks, mission_evaluator(world->context(), starts, bridge::cells(in.targets), in.horizon));
    if (cache.value(0, 0) == 0.0 || cache.value(0, cache.all_tasks()) == 1.0) {
      --trial;
      continue;
    }
    for (int r = 0; r < robots; ++r) {
      for (TaskMask big = 0; big <= cache.all_tasks(); ++big) {
        for (TaskMask small = big;; small = (small - 1) & big) {
          const double gap = cache.value(r, big) - cache.value(r, small);
          ++pairs;
          if (gap > 0.0) {
            ++violations;
            worst = std::max(worst, gap);
          }
          if (small == 0) break;
        }
      }
    }
    const int w = robots * tasks;
    for (GroundSet a = 0; a < (GroundSet{1} << w); ++a) {
      for (int e = 0; e < w; ++e) {
        if ((a >> e) & 1u) continue;
        const double gap = ground_extension(a | (GroundSet{1} << e), cache) - ground_extension(a, cache);
        ++ground_pairs;
        if (gap > 0.0) {
          ++violations;
          worst = std::max(worst, gap);
        }
      }
    }
  }
  return {violations == 0 && pairs >= 200,
          fmt("%ld subset pairs, %ld ground additions, %ld violations (largest %.2e)", pairs, ground_pairs,
              violations, worst)};
}

Outcome guarantee_inequalities() {
  oracle::Rng rng(70004);
  int instances = 0;
  int informative = 0;
  int broken = 0;
  while (instances < 30) {
    oracle::Instance in = oracle::random_instance(rng, 12, 4, 2, 4, 10, 0.35);
    const int tasks = static_cast<int>(in.targets.size());
    if (tasks == 0) continue;
    const int robots = std::min(oracle::pick(rng, 1, 3), 8 / tasks);
    const auto world = bridge::exact_world(in);
    const auto starts = starts_for(rng, in, robots);
    ObjectiveCache cache(robots, tasks, mission_evaluator(world->context(), starts, bridge::cells(in.targets), in.horizon));
    const RatioReport r = exact_ratios(cache);
    const double f_star = brute_force_optimal(cache).value;
    const double f_fg = forward_greedy(cache).value;
    const double f_rg = reverse_greedy(cache).value;
    const double f_empty = ground_extension(0, cache);
    const double f_full = ground_extension((GroundSet{1} << (robots * tasks)) - 1u, cache);
    const GuaranteeReport g = evaluate_guarantees(f_empty, f_full, f_star, f_fg, f_rg, r.alpha, r.gamma);
    if (!(g.fg_inequality_holds && g.rg_inequality_holds && g.fg_below_optimum && g.rg_below_optimum)) ++broken;
    if (!g.vacuous) ++informative;
    ++instances;
  }
  return {broken == 0, fmt("%d instances with |T||R| <= 8, %d failures, %d with non-vacuous bounds", instances,
                           broken, informative)};
}

Outcome regions() {
  double worst_corner = 0.0;
  for (double f_star : {0.1, 0.5, 0.717, 1.0}) {
    worst_corner = std::max({worst_corner, std::abs(forward_guarantee(0.0, 1.0, f_star) - f_star),
                             std::abs(reverse_guarantee(0.0, 1.0, f_star) - f_star)});
  }
  const RegionMap m = region_map(0.5, 100);
  int below = 0;
  for (double a : m.alphas) {
    for (double g : m.gammas) {
      if (reverse_guarantee(a, g, 0.5) < forward_guarantee(a, g, 0.5) - 1e-12) ++below;
    }
  }
  return {worst_corner <= 1e-12 && below == 0 && m.count() == 0,
          fmt("corner gap %.1e, F* = 0.5 grid 100x100: %d cells with g_rg < g_fg", worst_corner, below)};
}

Outcome paper_scale() {
  const Scenario s = load_scenario(std::filesystem::path(SAFEPLAN_SOURCE_DIR) / "scenarios" / "paper17x13.json");
  const Workspace ws(s, FieldOptions{});
  PipelineOptions o;
  o.brute = false;
  o.exact_ratios = false;
  const PipelineResult r = run_pipeline(ws, o);
  const MethodOutcome* fg = r.method("forward");
  const MethodOutcome* rg = r.method("reverse");
  const int tasks = static_cast<int>(s.targets.size());
  const bool a = fg->ok && rg->ok && fg->allocation.is_partition(tasks) && rg->allocation.is_partition(tasks);
  const bool b = a && fg->value > 0.0 && fg->value < 1.0 && rg->value > 0.0 && rg->value < 1.0;
  const bool c = rg->plan_requests > fg->plan_requests;
  const bool d = r.greedy && r.greedy->alpha > 0.8 && r.greedy->gamma > 0.0 && r.greedy->gamma < 1.0;
  const double alpha = r.greedy ? r.greedy->alpha : -1.0;
  const double gamma = r.greedy ? r.greedy->gamma : -1.0;
  return {a && b && c && d,
          fmt("(a) %s (b) F_fg = %.4f, F_rg = %.4f (c) plan requests %zu vs %zu (d) alpha_G = %.4f, gamma_G = %.4f",
              a ? "partitions" : "NOT partitions", fg->value, rg->value, rg->plan_requests, fg->plan_requests,
              alpha, gamma)};
}

Outcome rollouts() {
  oracle::Rng rng(70007);
  const std::size_t trials = 100000;
  int instances = 0;
  int outside = 0;
  double worst_z = 0.0;
  while (instances < 12) {
    const oracle::Instance in = oracle::random_instance(rng, 12, 2, 2, 3, 9, 0.4);
    auto world = bridge::exact_world(in);
    if (instances % 2 == 1) world->motion = MotionKernel::slip(world->map, 0.85);
    const PlanContext ctx = world->context();
    const PlanQuery q = bridge::query(in);
    const PlanResult plan = dp_solve(ctx, q);
    if (plan.success < 0.05 || plan.success > 0.95) continue;
    const RolloutStats st = rollout(ctx, q, plan.policy, RolloutMode::ModelConsistent, trials,
                                    500 + static_cast<std::uint64_t>(instances));
    const double sigma = std::sqrt(plan.success * (1.0 - plan.success) / static_cast<double>(trials));
    const double z = std::abs(st.rate - plan.success) / sigma;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++outside;
    ++instances;
  }
  return {outside == 0, fmt("%d instances at %zu trials, %d outside 3 sigma, largest |z| = %.2f", instances, trials,
                            outside, worst_z)};
}

Outcome determinism() {
  const Scenario s = load_scenario(std::filesystem::path(SAFEPLAN_SOURCE_DIR) / "scenarios" / "small.json");
  std::string dumps[2];
  const int threads[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    const Workspace ws(s, FieldOptions{.threads = threads[i]});
    PipelineOptions o;
    o.threads = threads[i];
    o.rollout_trials = 2000;
    o.paths = true;
    dumps[i] = strip_wall_clock(report_json(run_pipeline(ws, o), ws)).dump();
  }
  return {dumps[0] == dumps[1], fmt("reports at 1 and 8 threads %s (%zu bytes)",
                                    dumps[0] == dumps[1] ? "identical" : "differ", dumps[0].size())};
}

}  // namespace

int main() {
  report("AC1", "DP vs policy-enumeration oracle", dp_oracle);
  report("AC2", "Monte-Carlo vs exact hazard", hazard_exactness);
  report("AC3", "monotonicity", monotonicity);
  report("AC4", "guarantee inequalities end to end", guarantee_inequalities);
  report("AC5", "guarantee regions", regions);
  report("AC6", "17x13 scenario", paper_scale);
  report("AC7", "rollout consistency", rollouts);
  report("AC8", "thread determinism", determinism);
  return failures == 0 ? 0 : 1;
}

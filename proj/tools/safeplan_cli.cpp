// Command-line driver: plan, allocate, simulate, bounds, render.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "safeplan/error.hpp"
#include "safeplan/pipeline.hpp"
#include "safeplan/render.hpp"

using namespace safeplan;
using nlohmann::json;

namespace {

struct Globals {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  int threads = 1;
  std::string out;
  std::string field_cache;
  bool exact_field = false;
};

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty() || g.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + g.out);
  f << text;
}

std::unique_ptr<Workspace> workspace(const Globals& g) {
  if (g.scenario.empty()) throw ValidationError("--scenario is required");
  FieldOptions opts;
  opts.samples = g.samples;
  opts.seed = g.seed;
  opts.threads = g.threads;
  opts.exact = g.exact_field;
  if (!g.field_cache.empty()) opts.cache_dir = g.field_cache;
  auto ws = std::make_unique<Workspace>(load_scenario(g.scenario), opts);
  std::cerr << "field: " << (ws->field_exact() ? "exact" : std::to_string(ws->samples()) + " samples")
            << (ws->field_from_cache() ? " (cached)" : "") << ", " << ws->field_wall_clock_s()
            << " s\n";
  return ws;
}

int robot_index(const Scenario& s, const std::string& name) {
  for (std::size_t r = 0; r < s.robots.size(); ++r) {
    if (s.robots[r].name == name) return static_cast<int>(r);
  }
  try {
    std::size_t used = 0;
    const int i = std::stoi(name, &used);
    if (used == name.size() && i >= 0 && static_cast<std::size_t>(i) < s.robots.size()) return i;
  } catch (const std::exception&) {
  }
  throw ValidationError("unknown robot '" + name + "'");
}

TaskMask target_mask(const Scenario& s, const std::vector<std::string>& labels) {
  TaskMask mask = 0;
  for (const std::string& l : labels) {
    bool found = false;
    for (std::size_t i = 0; i < s.targets.size(); ++i) {
      if (s.targets[i].label == l) {
        mask |= TaskMask{1} << i;
        found = true;
      }
    }
    if (!found) throw ValidationError("unknown target '" + l + "'");
  }
  return mask;
}

PipelineOptions methods_from(const std::string& method) {
  PipelineOptions o;
  o.forward = method == "forward" || method == "all";
  o.reverse = method == "reverse" || method == "all";
  o.brute = method == "brute" || method == "all";
  return o;
}

RolloutMode rollout_mode(const std::string& mode) {
  return mode == "model" ? RolloutMode::ModelConsistent : RolloutMode::JointHazard;
}

int failure_code(const PipelineResult& res) {
  for (const MethodOutcome& m : res.methods) {
    if (!m.ok) return m.exit_code;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe multi-robot mission planning under a spreading hazard"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--scenario,-s", g.scenario, "Scenario JSON file");
  app.add_option("--seed", g.seed, "Override the Monte-Carlo seed");
  app.add_option("--samples", g.samples, "Override the Monte-Carlo sample count");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out,-o", g.out, "Output file (default stdout)");
  app.add_option("--field-cache", g.field_cache, "Directory for cached contamination fields");
  app.add_flag("--exact-field", g.exact_field, "Propagate the hazard exactly (small maps only)");

  auto* plan = app.add_subcommand("plan", "Plan one robot over an explicit target list");
  std::string plan_robot = "0";
  std::vector<std::string> plan_targets;
  std::size_t plan_trials = 0;
  std::string plan_mode = "model";
  plan->add_option("--robot", plan_robot, "Robot name or index");
  plan->add_option("--targets", plan_targets, "Target labels")->delimiter(',');
  plan->add_option("--trials", plan_trials, "Rollouts of the optimal policy");
  plan->add_option("--mode", plan_mode, "Rollout mode")->check(CLI::IsMember({"model", "joint"}));

  auto* allocate = app.add_subcommand("allocate", "Allocate targets to robots");
  std::string method = "all";
  std::size_t alloc_trials = 0;
  bool alloc_paths = false;
  bool feasible_only = false;
  allocate->add_option("--method", method, "Allocator")
      ->check(CLI::IsMember({"forward", "reverse", "brute", "all"}));
  allocate->add_option("--rollouts", alloc_trials, "Joint-hazard rollouts per allocation");
  allocate->add_flag("--paths", alloc_paths, "Include nominal robot paths");
  allocate->add_flag("--feasible-only", feasible_only, "Restrict ratio triples to feasible sets");

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo execution of optimal policies");
  std::string sim_mode = "joint";
  std::size_t sim_trials = 10000;
  std::string sim_robot;
  std::vector<std::string> sim_targets;
  std::string sim_method = "forward";
  simulate->add_option("--mode", sim_mode, "model: per-step contamination draws; joint: sampled hazard")
      ->check(CLI::IsMember({"model", "joint"}));
  simulate->add_option("--trials", sim_trials, "Number of rollouts")->check(CLI::PositiveNumber);
  simulate->add_option("--robot", sim_robot, "Single robot (with --targets)");
  simulate->add_option("--targets", sim_targets, "Target labels")->delimiter(',');
  simulate->add_option("--method", sim_method, "Allocator whose allocation is simulated")
      ->check(CLI::IsMember({"forward", "reverse", "brute"}));

  auto* bounds = app.add_subcommand("bounds", "Curvature, submodularity ratio and guarantees");
  bool exact = false;
  bool greedy = false;
  bool bounds_feasible = false;
  bounds->add_flag("--exact", exact, "Exhaustive ratios over the ground set");
  bounds->add_flag("--greedy", greedy, "Ratios from greedy evaluations only");
  bounds->add_flag("--feasible-only", bounds_feasible, "Restrict triples to feasible sets");

  auto* render = app.add_subcommand("render", "SVG or PGM figures");
  std::string what = "heatmap";
  std::string format = "svg";
  std::string render_method = "brute";
  std::string report_path;
  double f_star = 0.5;
  int resolution = 100;
  render->add_option("--what", what, "Figure")->check(CLI::IsMember({"heatmap", "paths", "region-map"}));
  render->add_option("--format", format, "Output format")->check(CLI::IsMember({"svg", "pgm"}));
  render->add_option("--method", render_method, "Allocation whose paths are drawn")
      ->check(CLI::IsMember({"forward", "reverse", "brute"}));
  render->add_option("--report", report_path, "Take paths from an allocate --paths report");
  render->add_option("--fstar", f_star, "Optimal value for the region map")->check(CLI::Range(0.0, 1.0));
  render->add_option("--resolution", resolution, "Region map resolution")->check(CLI::Range(2, 2000));

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) {
      auto ws = workspace(g);
      const Scenario& s = ws->scenario();
      const int r = robot_index(s, plan_robot);
      const PlanQuery q = ws->query(r, target_mask(s, plan_targets));
      const PlanResult p = dp_solve(ws->context(), q, true);
      json out{{"robot", s.robots[static_cast<std::size_t>(r)].name},
               {"targets", plan_targets},
               {"success", p.success},
               {"diagnostics", p.diagnostics}};
      const PathTrace path = trace_path(ws->context(), q, p.policy);
      json cells = json::array();
      for (Cell c : path.cells) cells.push_back({c.col, c.row});
      out["path"] = {{"cells", cells}, {"reaches_goal", path.reaches_goal}};
      if (plan_trials > 0) {
        out["rollout"] = to_json(rollout(ws->context(), q, p.policy, rollout_mode(plan_mode),
                                         plan_trials, ws->seed(), g.threads));
      }
      emit(g, out.dump(2) + "\n");
      return kExitOk;
    }

    if (allocate->parsed()) {
      auto ws = workspace(g);
      PipelineOptions o = methods_from(method);
      o.threads = g.threads;
      o.rollout_trials = alloc_trials;
      o.paths = alloc_paths;
      o.feasible_only = feasible_only;
      const PipelineResult res = run_pipeline(*ws, o);
      emit(g, report_json(res, *ws).dump(2) + "\n");
      return failure_code(res);
    }

    if (simulate->parsed()) {
      auto ws = workspace(g);
      const Scenario& s = ws->scenario();
      const RolloutMode mode = rollout_mode(sim_mode);
      json out;
      if (!sim_robot.empty()) {
        const int r = robot_index(s, sim_robot);
        const PlanQuery q = ws->query(r, target_mask(s, sim_targets));
        const PlanResult p = dp_solve(ws->context(), q, true);
        out = {{"robot", s.robots[static_cast<std::size_t>(r)].name},
               {"f", p.success},
               {"mode", sim_mode},
               {"rollout", to_json(rollout(ws->context(), q, p.policy, mode, sim_trials, ws->seed(),
                                           g.threads))}};
      } else {
        PipelineOptions o = methods_from(sim_method);
        o.threads = g.threads;
        o.exact_ratios = false;
        o.greedy_ratios = false;
        o.rollout_trials = sim_trials;
        o.rollout_mode = mode;
        const PipelineResult res = run_pipeline(*ws, o);
        const MethodOutcome& m = res.methods.front();
        if (!m.ok) {
          std::cerr << "error: " << m.error << '\n';
          return m.exit_code;
        }
        out = {{"method", m.method}, {"F", m.value}, {"mode", sim_mode}};
        if (m.group_rollout) out["rollout_joint"] = to_json(*m.group_rollout);
        json per_robot = json::object();
        for (std::size_t r = 0; r < m.robot_rollouts.size(); ++r) {
          per_robot[s.robots[r].name] = {{"f", m.robot_values[r]}, {"rollout", to_json(m.robot_rollouts[r])}};
        }
        if (!m.robot_rollouts.empty()) out["rollout_model"] = per_robot;
      }
      emit(g, out.dump(2) + "\n");
      return kExitOk;
    }

    if (bounds->parsed()) {
      if (!exact && !greedy) exact = greedy = true;
      auto ws = workspace(g);
      PipelineOptions o;
      o.threads = g.threads;
      o.exact_ratios = exact;
      o.greedy_ratios = greedy;
      o.feasible_only = bounds_feasible;
      o.brute = exact;
      const PipelineResult res = run_pipeline(*ws, o);
      json full = report_json(res, *ws);
      json out{{"scenario_hash", full["scenario_hash"]},
               {"ratios", full["ratios"]},
               {"guarantees", full["guarantees"]},
               {"F_empty", res.f_empty},
               {"F_full", res.f_full}};
      for (const MethodOutcome& m : res.methods) {
        out["F"][m.method] = m.ok ? json(m.value) : json(nullptr);
      }
      emit(g, out.dump(2) + "\n");
      if (exact && !res.exact) {
        std::cerr << "exact ratios unavailable: " << res.exact_skipped << '\n';
        return kExitCapExceeded;
      }
      return failure_code(res);
    }

    if (render->parsed()) {
      if (what == "region-map") {
        const RegionMap region = region_map(f_star, resolution);
        if (format == "pgm" && (g.out.empty() || g.out == "-")) {
          throw ValidationError("PGM output needs --out");
        }
        emit(g, format == "pgm" ? region_pgm(region) : render_region_svg(region));
        return kExitOk;
      }
      auto ws = workspace(g);
      const Scenario& s = ws->scenario();
      if (format == "pgm") {
        if (what != "heatmap") throw ValidationError("PGM output is only available for heatmaps");
        if (g.out.empty() || g.out == "-") throw ValidationError("PGM output needs --out");
        emit(g, heatmap_pgm(ws->map(), ws->estimate().heatmap));
        return kExitOk;
      }
      std::vector<std::vector<Cell>> paths;
      if (what == "paths") {
        if (!report_path.empty()) {
          std::ifstream in(report_path);
          if (!in) throw ValidationError("cannot open report " + report_path);
          const json report = json::parse(in);
          const json& m = report.at("methods").at(render_method);
          if (!m.contains("paths")) {
            throw ValidationError(report_path + ": method " + render_method + " has no paths");
          }
          for (const RobotSpec& r : s.robots) {
            std::vector<Cell> cells;
            for (const json& c : m["paths"].at(r.name).at("cells")) cells.push_back({c[0], c[1]});
            paths.push_back(std::move(cells));
          }
        } else {
          PipelineOptions o = methods_from(render_method);
          o.threads = g.threads;
          o.exact_ratios = false;
          o.greedy_ratios = false;
          o.paths = true;
          const PipelineResult res = run_pipeline(*ws, o);
          const MethodOutcome& m = res.methods.front();
          if (!m.ok) {
            std::cerr << "error: " << m.error << '\n';
            return m.exit_code;
          }
          for (const PathTrace& p : m.paths) paths.push_back(p.cells);
        }
      }
      emit(g, render_map_svg(s, ws->map(), ws->estimate().heatmap, paths));
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CapExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCapExceeded;
  } catch (const NumericViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

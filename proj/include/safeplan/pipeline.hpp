#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safeplan/alloc.hpp"
#include "safeplan/bounds.hpp"
#include "safeplan/hazard.hpp"
#include "safeplan/reach.hpp"
#include "safeplan/scenario.hpp"

namespace safeplan {

inline constexpr const char* kToolVersion = "0.1.0";

struct FieldOptions {
  std::optional<std::size_t> samples;  // overrides the scenario's monte_carlo.samples
  std::optional<std::uint64_t> seed;   // overrides monte_carlo.seed
  int threads = 1;
  std::optional<std::filesystem::path> cache_dir;
  bool exact = false;  // exhaustive propagation instead of Monte Carlo
};

/// A loaded scenario with its map, motion and hazard models and the
/// contamination field every plan shares.
class Workspace {
 public:
  Workspace(Scenario scenario, const FieldOptions& options);

  const Scenario& scenario() const { return scenario_; }
  const GridMap& map() const { return map_; }
  const MotionKernel& motion() const { return motion_; }
  const HazardModel& hazard() const { return hazard_; }
  const HazardEstimate& estimate() const { return estimate_; }
  const ContaminationField& field() const { return estimate_.field; }
  const std::string& hash() const { return hash_; }
  std::size_t samples() const { return samples_; }
  std::uint64_t seed() const { return seed_; }
  bool field_exact() const { return exact_; }
  bool field_from_cache() const { return from_cache_; }
  double field_wall_clock_s() const { return field_seconds_; }

  PlanContext context() const { return {&map_, &motion_, &estimate_.field, &hazard_}; }
  PlanQuery query(int robot, TaskMask tasks) const;
  std::unique_ptr<ObjectiveCache> make_cache() const;

 private:
  Scenario scenario_;
  std::string hash_;
  std::size_t samples_;
  std::uint64_t seed_;
  bool exact_;
  bool from_cache_ = false;
  double field_seconds_ = 0.0;
  GridMap map_;
  MotionKernel motion_;
  HazardModel hazard_;
  HazardEstimate estimate_;
};

struct PipelineOptions {
  bool forward = true;
  bool reverse = true;
  bool brute = true;
  int threads = 1;
  bool exact_ratios = true;   // when under the scenario's cap
  bool greedy_ratios = true;
  bool feasible_only = false;
  std::size_t rollout_trials = 0;
  RolloutMode rollout_mode = RolloutMode::JointHazard;
  bool paths = false;
};

struct MethodOutcome {
  std::string method;
  bool ok = false;
  std::string error;
  int exit_code = 0;
  Allocation allocation;
  double value = 0.0;
  std::vector<double> robot_values;
  std::size_t plan_requests = 0;  // distinct (robot, task set) pairs the method asked for
  std::size_t plan_solves = 0;    // of those, not already cached by an earlier method
  double wall_clock_s = 0.0;
  std::optional<GreedyTrace> trace;
  std::vector<MonotonicityViolation> strictness;
  std::vector<std::string> notes;
  std::optional<RolloutStats> group_rollout;   // joint hazard, all robots
  std::vector<RolloutStats> robot_rollouts;    // model-consistent, per robot
  std::vector<PathTrace> paths;
};

struct PipelineResult {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  bool field_exact = false;
  std::size_t flagged = 0;
  double f_empty = 0.0;
  double f_full = 0.0;
  std::vector<MethodOutcome> methods;
  std::optional<RatioReport> exact;
  std::string exact_skipped;
  std::optional<RatioReport> greedy;
  std::optional<GuaranteeReport> guarantees;
  std::vector<std::string> diagnostics;
  double wall_clock_s = 0.0;

  const MethodOutcome* method(const std::string& name) const;
};

/// Runs the requested allocators over one shared objective cache, then the
/// ratio and guarantee reports they make possible. A failing method is
/// recorded in its outcome and does not stop the others.
PipelineResult run_pipeline(const Workspace& ws, const PipelineOptions& options);

/// Reachability and contamination warnings for the scenario as a whole.
std::vector<std::string> scenario_diagnostics(const Workspace& ws);

nlohmann::json report_json(const PipelineResult& result, const Workspace& ws);
/// Copy of `report` without any "wall_clock_s" member, at any depth.
nlohmann::json strip_wall_clock(nlohmann::json report);

nlohmann::json to_json(const RatioReport& r, const Scenario& s);
nlohmann::json to_json(const GuaranteeReport& g);
nlohmann::json to_json(const RolloutStats& r);

}  // namespace safeplan

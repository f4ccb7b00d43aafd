#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safeplan/gridmap.hpp"
#include "safeplan/hazard.hpp"

namespace safeplan {

inline constexpr int kScenarioVersion = 1;

/// Inclusive cell rectangle.
struct CellRect {
  Cell min;
  Cell max;
};

struct RobotSpec {
  std::string name;
  Cell start;
};

struct TargetSpec {
  std::string label;
  Cell cell;
};

enum class MotionKind { Deterministic, Slip, Tabular };

struct MotionSpec {
  MotionKind kind = MotionKind::Deterministic;
  double p_intended = 1.0;           // slip only
  std::vector<MotionEntry> entries;  // tabular only
};

struct Caps {
  std::size_t exact_hazard_cells = kDefaultExactCellCap;
  double brute_force = 1e6;
  double exact_ratio_work = 1e7;
};

/// Mission configuration as read from a scenario file.
struct Scenario {
  int version = kScenarioVersion;
  std::string name;
  std::string description;
  int width = 0;
  int height = 0;
  std::vector<Cell> obstacle_cells;
  std::vector<CellRect> obstacle_rects;
  Cell goal;
  std::vector<RobotSpec> robots;
  std::vector<TargetSpec> targets;
  double default_theta = 0.0;
  std::vector<HazardSource> sources;
  MotionSpec motion;
  int horizon = 1;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  Caps caps;

  /// Obstacle cells from both lists, sorted and deduplicated.
  std::vector<Cell> obstacles() const;
  std::vector<Cell> starts() const;
  std::vector<Cell> target_cells() const;

  GridMap make_map() const;
  HazardModel make_hazard(const GridMap& map) const;
  MotionKernel make_motion(const GridMap& map) const;
};

/// Parses and validates. Errors carry the JSON pointer of the offending
/// field, e.g. "/targets/2/cell: (3,4) is an obstacle".
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);

nlohmann::json to_json(const Scenario& s);
void save_scenario(const std::filesystem::path& path, const Scenario& s);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string scenario_hash(const Scenario& s);

bool operator==(const Scenario& a, const Scenario& b);

std::string to_string(MotionKind kind);

}  // namespace safeplan

#pragma once

#include <span>
#include <string>
#include <vector>

#include "safeplan/bounds.hpp"
#include "safeplan/gridmap.hpp"
#include "safeplan/scenario.hpp"

namespace safeplan {

struct RenderStyle {
  int cell_px = 24;
};

/// Grid, obstacles, hazard sources, targets, exit and robot starts. Free cells
/// with positive `heatmap` value (per free index) are shaded in proportion to
/// it; `paths` holds one cell sequence per robot, drawn as polylines with
/// repeated cells (Stay actions) collapsed. Row 0 is drawn at the bottom.
std::string render_map_svg(const Scenario& scenario, const GridMap& map,
                           std::span<const double> heatmap,
                           std::span<const std::vector<Cell>> paths, const RenderStyle& style = {});

/// Cells where the forward guarantee beats the reverse one are shaded;
/// alpha runs left to right, gamma bottom to top.
std::string render_region_svg(const RegionMap& region, const RenderStyle& style = {});

/// Binary 16-bit PGM (P5, maxval 65535, big-endian), one pixel per cell, top
/// row = highest grid row. Obstacles are 0; a free cell with value p is
/// 1 + round(p * 65534).
std::string heatmap_pgm(const GridMap& map, std::span<const double> heatmap);

/// Binary 16-bit PGM, 65535 where the forward guarantee wins, 0 elsewhere;
/// top row = largest gamma.
std::string region_pgm(const RegionMap& region);

/// Polyline vertices of a path after collapsing repeated cells.
std::vector<Cell> collapse_stays(std::span<const Cell> path);

}  // namespace safeplan

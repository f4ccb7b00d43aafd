#include "safeplan/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>

#include "safeplan/error.hpp"

namespace safeplan {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v & 0xff));
}

}  // namespace

std::vector<Cell> collapse_stays(std::span<const Cell> path) {
  std::vector<Cell> out;
  for (Cell c : path) {
    if (out.empty() || out.back() != c) out.push_back(c);
  }
  return out;
}

std::string render_map_svg(const Scenario& scenario, const GridMap& map,
                           std::span<const double> heatmap,
                           std::span<const std::vector<Cell>> paths, const RenderStyle& style) {
  if (!heatmap.empty() && heatmap.size() != map.free_count()) {
    throw ValidationError("heatmap does not match the map");
  }
  const int px = style.cell_px;
  const int w = map.width() * px;
  const int h = map.height() * px;
  auto x0 = [&](Cell c) { return c.col * px; };
  auto y0 = [&](Cell c) { return (map.height() - 1 - c.row) * px; };
  auto cx = [&](Cell c) { return x0(c) + px / 2.0; };
  auto cy = [&](Cell c) { return y0(c) + px / 2.0; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";

  svg << "<g id=\"heatmap\">\n";
  for (std::size_t i = 0; i < heatmap.size(); ++i) {
    if (!(heatmap[i] > 0.0)) continue;
    const Cell c = map.cell_at(static_cast<int>(i));
    svg << "<rect class=\"heat\" x=\"" << x0(c) << "\" y=\"" << y0(c) << "\" width=\"" << px
        << "\" height=\"" << px << "\" fill=\"#e6550d\" fill-opacity=\""
        << fmt(std::min(1.0, heatmap[i])) << "\"/>\n";
  }
  svg << "</g>\n<g id=\"obstacles\">\n";
  for (Cell c : map.obstacles()) {
    svg << "<rect class=\"obstacle\" x=\"" << x0(c) << "\" y=\"" << y0(c) << "\" width=\"" << px
        << "\" height=\"" << px << "\" fill=\"#333333\"/>\n";
  }
  svg << "</g>\n<g id=\"grid\" stroke=\"#bbbbbb\" stroke-width=\"0.5\">\n";
  for (int col = 0; col <= map.width(); ++col) {
    svg << "<line x1=\"" << col * px << "\" y1=\"0\" x2=\"" << col * px << "\" y2=\"" << h << "\"/>\n";
  }
  for (int row = 0; row <= map.height(); ++row) {
    svg << "<line x1=\"0\" y1=\"" << row * px << "\" x2=\"" << w << "\" y2=\"" << row * px << "\"/>\n";
  }
  svg << "</g>\n";

  const Cell goal = map.goal();
  svg << "<rect class=\"goal\" x=\"" << x0(goal) + 2 << "\" y=\"" << y0(goal) + 2 << "\" width=\""
      << px - 4 << "\" height=\"" << px - 4 << "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>\n";

  svg << "<g id=\"sources\">\n";
  for (const HazardSource& src : scenario.sources) {
    svg << "<circle class=\"source\" cx=\"" << cx(src.cell) << "\" cy=\"" << cy(src.cell)
        << "\" r=\"" << px * 0.3 << "\" fill=\"#a50f15\"/>\n"
        << "<text x=\"" << cx(src.cell) << "\" y=\"" << cy(src.cell) + px * 0.15
        << "\" font-size=\"" << px * 0.4 << "\" text-anchor=\"middle\" fill=\"white\">"
        << escape(src.label) << "</text>\n";
  }
  svg << "</g>\n<g id=\"targets\">\n";
  for (const TargetSpec& t : scenario.targets) {
    svg << "<text class=\"target\" x=\"" << cx(t.cell) << "\" y=\"" << cy(t.cell) + px * 0.2
        << "\" font-size=\"" << px * 0.55 << "\" text-anchor=\"middle\" font-weight=\"bold\">"
        << escape(t.label) << "</text>\n";
  }
  svg << "</g>\n<g id=\"paths\" fill=\"none\" stroke-width=\"2\">\n";
  for (std::size_t r = 0; r < paths.size(); ++r) {
    const std::vector<Cell> pts = collapse_stays(paths[r]);
    const char* color = kPalette[r % std::size(kPalette)];
    svg << "<polyline class=\"path\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      svg << (i ? " " : "") << cx(pts[i]) << ',' << cy(pts[i]);
    }
    svg << "\"/>\n";
  }
  svg << "</g>\n<g id=\"robots\">\n";
  for (std::size_t r = 0; r < scenario.robots.size(); ++r) {
    const Cell c = scenario.robots[r].start;
    svg << "<rect class=\"robot\" x=\"" << cx(c) - px * 0.2 << "\" y=\"" << cy(c) - px * 0.2
        << "\" width=\"" << px * 0.4 << "\" height=\"" << px * 0.4 << "\" fill=\""
        << kPalette[r % std::size(kPalette)] << "\"><title>" << escape(scenario.robots[r].name)
        << "</title></rect>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

std::string render_region_svg(const RegionMap& region, const RenderStyle& style) {
  const int px = std::max(2, style.cell_px / 6);
  const int n = region.resolution;
  const int margin = 40;
  const int size = n * px;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << size + 2 * margin
      << "\" height=\"" << size + 2 * margin << "\">\n"
      << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\""
      << size << "\" fill=\"white\" stroke=\"black\"/>\n<g id=\"region\">\n";
  for (int gi = 0; gi < n; ++gi) {
    for (int ai = 0; ai < n; ++ai) {
      if (!region.at(ai, gi)) continue;
      svg << "<rect class=\"region\" x=\"" << margin + ai * px << "\" y=\""
          << margin + (n - 1 - gi) * px << "\" width=\"" << px << "\" height=\"" << px
          << "\" fill=\"#6baed6\"/>\n";
    }
  }
  svg << "</g>\n"
      << "<text x=\"" << margin + size / 2 << "\" y=\"" << size + margin + 28
      << "\" text-anchor=\"middle\" font-size=\"14\">alpha (0 to 0.99)</text>\n"
      << "<text x=\"14\" y=\"" << margin + size / 2 << "\" text-anchor=\"middle\" font-size=\"14\""
      << " transform=\"rotate(-90 14 " << margin + size / 2 << ")\">gamma (0.01 to 1)</text>\n"
      << "<text x=\"" << margin << "\" y=\"24\" font-size=\"14\">F* = " << fmt(region.f_star)
      << ", forward guarantee better in " << region.count() << " of " << n * n
      << " cells</text>\n</svg>\n";
  return svg.str();
}

std::string heatmap_pgm(const GridMap& map, std::span<const double> heatmap) {
  if (heatmap.size() != map.free_count()) throw ValidationError("heatmap does not match the map");
  std::string out = "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n65535\n";
  for (int row = map.height() - 1; row >= 0; --row) {
    for (int col = 0; col < map.width(); ++col) {
      const int i = map.free_index({col, row});
      std::uint16_t v = 0;
      if (i >= 0) {
        const double p = std::clamp(heatmap[static_cast<std::size_t>(i)], 0.0, 1.0);
        v = static_cast<std::uint16_t>(1 + std::lround(p * 65534.0));
      }
      put16(out, v);
    }
  }
  return out;
}

std::string region_pgm(const RegionMap& region) {
  const int n = region.resolution;
  std::string out = "P5\n" + std::to_string(n) + " " + std::to_string(n) + "\n65535\n";
  for (int gi = n - 1; gi >= 0; --gi) {
    for (int ai = 0; ai < n; ++ai) put16(out, region.at(ai, gi) ? 65535 : 0);
  }
  return out;
}

}  // namespace safeplan

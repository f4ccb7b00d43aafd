#include "safeplan/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "safeplan/error.hpp"

namespace safeplan {

using nlohmann::json;

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::Deterministic: return "deterministic";
    case MotionKind::Slip: return "slip";
    case MotionKind::Tabular: return "tabular";
  }
  return "deterministic";
}

std::vector<Cell> Scenario::obstacles() const {
  std::vector<Cell> out = obstacle_cells;
  for (const CellRect& r : obstacle_rects) {
    for (int row = r.min.row; row <= r.max.row; ++row) {
      for (int col = r.min.col; col <= r.max.col; ++col) out.push_back({col, row});
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Cell> Scenario::starts() const {
  std::vector<Cell> out;
  for (const RobotSpec& r : robots) out.push_back(r.start);
  return out;
}

std::vector<Cell> Scenario::target_cells() const {
  std::vector<Cell> out;
  for (const TargetSpec& t : targets) out.push_back(t.cell);
  return out;
}

GridMap Scenario::make_map() const { return GridMap(width, height, obstacles(), goal); }

HazardModel Scenario::make_hazard(const GridMap& map) const {
  return HazardModel(map, sources, default_theta);
}

MotionKernel Scenario::make_motion(const GridMap& map) const {
  switch (motion.kind) {
    case MotionKind::Deterministic: return MotionKernel::deterministic(map);
    case MotionKind::Slip: return MotionKernel::slip(map, motion.p_intended);
    case MotionKind::Tabular: return MotionKernel::tabular(map, motion.entries);
  }
  return MotionKernel::deterministic(map);
}

// ------------------------------------------------------------------ parsing

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ValidationError((path.empty() ? "/" : path) + ": " + message);
}

std::string json_type(const json& v) { return v.type_name(); }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) fail(path + "/" + key, "unknown field");
  }
}

const json& object_at(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object, got " + json_type(v));
  return v;
}

const json& array_at(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array, got " + json_type(v));
  return v;
}

const json& field(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "/" + key, "missing required field");
  return *it;
}

const json* optional_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

long long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer, got " + json_type(v));
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT32_MAX)) {
    fail(path, "integer out of range");
  }
  return v.get<long long>();
}

int small_int(const json& v, const std::string& path) {
  const long long x = integer(v, path);
  if (x < INT32_MIN || x > INT32_MAX) fail(path, "integer out of range");
  return static_cast<int>(x);
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number, got " + json_type(v));
  return v.get<double>();
}

double probability(const json& v, const std::string& path) {
  const double p = number(v, path);
  if (!(p >= 0.0 && p <= 1.0)) fail(path, "must lie in [0, 1], got " + std::to_string(p));
  return p;
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string, got " + json_type(v));
  return v.get<std::string>();
}

Cell cell(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) fail(path, "expected a cell [col, row]");
  return {small_int(v[0], path + "/0"), small_int(v[1], path + "/1")};
}

/// Bounds and obstacle checks against the parsed map.
struct MapCheck {
  int width;
  int height;
  std::set<Cell> blocked;

  void in_bounds(Cell c, const std::string& path) const {
    if (c.col < 0 || c.row < 0 || c.col >= width || c.row >= height) {
      fail(path, to_string(c) + " is outside the " + std::to_string(width) + "x" +
                     std::to_string(height) + " map");
    }
  }
  void free(Cell c, const std::string& path) const {
    in_bounds(c, path);
    if (blocked.contains(c)) fail(path, to_string(c) + " is an obstacle");
  }
};

void parse_map(const json& doc, Scenario& s, MapCheck& check) {
  const json& map = object_at(field(doc, "", "map"), "/map");
  check_keys(map, "/map", {"width", "height", "goal", "obstacles"});
  s.width = small_int(field(map, "/map", "width"), "/map/width");
  s.height = small_int(field(map, "/map", "height"), "/map/height");
  if (s.width < 1) fail("/map/width", "must be positive");
  if (s.height < 1) fail("/map/height", "must be positive");
  check.width = s.width;
  check.height = s.height;

  if (const json* obs = optional_field(map, "obstacles")) {
    object_at(*obs, "/map/obstacles");
    check_keys(*obs, "/map/obstacles", {"cells", "rects"});
    if (const json* cells = optional_field(*obs, "cells")) {
      array_at(*cells, "/map/obstacles/cells");
      for (std::size_t i = 0; i < cells->size(); ++i) {
        const std::string p = "/map/obstacles/cells/" + std::to_string(i);
        const Cell c = cell((*cells)[i], p);
        check.in_bounds(c, p);
        s.obstacle_cells.push_back(c);
      }
    }
    if (const json* rects = optional_field(*obs, "rects")) {
      array_at(*rects, "/map/obstacles/rects");
      for (std::size_t i = 0; i < rects->size(); ++i) {
        const std::string p = "/map/obstacles/rects/" + std::to_string(i);
        const json& r = object_at((*rects)[i], p);
        check_keys(r, p, {"min", "max"});
        CellRect rect{cell(field(r, p, "min"), p + "/min"), cell(field(r, p, "max"), p + "/max")};
        check.in_bounds(rect.min, p + "/min");
        check.in_bounds(rect.max, p + "/max");
        if (rect.min.col > rect.max.col || rect.min.row > rect.max.row) {
          fail(p, "min must not exceed max");
        }
        s.obstacle_rects.push_back(rect);
      }
    }
  }
  for (Cell c : s.obstacles()) check.blocked.insert(c);
  s.goal = cell(field(map, "/map", "goal"), "/map/goal");
  check.free(s.goal, "/map/goal");
}

void parse_motion(const json& doc, Scenario& s, const MapCheck& check) {
  const json* m = optional_field(doc, "motion");
  if (!m) return;
  object_at(*m, "/motion");
  check_keys(*m, "/motion", {"kind", "p_intended", "entries"});
  const std::string kind = text(field(*m, "/motion", "kind"), "/motion/kind");
  if (kind == "deterministic") {
    s.motion.kind = MotionKind::Deterministic;
  } else if (kind == "slip") {
    s.motion.kind = MotionKind::Slip;
    s.motion.p_intended = probability(field(*m, "/motion", "p_intended"), "/motion/p_intended");
  } else if (kind == "tabular") {
    s.motion.kind = MotionKind::Tabular;
    const json& entries = array_at(field(*m, "/motion", "entries"), "/motion/entries");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::string p = "/motion/entries/" + std::to_string(i);
      const json& e = object_at(entries[i], p);
      check_keys(e, p, {"cell", "action", "outcomes"});
      MotionEntry entry;
      entry.cell = cell(field(e, p, "cell"), p + "/cell");
      check.free(entry.cell, p + "/cell");
      const std::string action = text(field(e, p, "action"), p + "/action");
      const auto move = parse_move(action);
      if (!move) fail(p + "/action", "unknown action '" + action + "'");
      entry.action = *move;
      const json& outs = array_at(field(e, p, "outcomes"), p + "/outcomes");
      for (std::size_t j = 0; j < outs.size(); ++j) {
        const std::string q = p + "/outcomes/" + std::to_string(j);
        const json& o = object_at(outs[j], q);
        check_keys(o, q, {"cell", "p"});
        const Cell to = cell(field(o, q, "cell"), q + "/cell");
        check.free(to, q + "/cell");
        entry.outcomes.emplace_back(to, probability(field(o, q, "p"), q + "/p"));
      }
      s.motion.entries.push_back(std::move(entry));
    }
  } else {
    fail("/motion/kind", "expected deterministic, slip or tabular, got '" + kind + "'");
  }
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  object_at(doc, "");
  check_keys(doc, "", {"version", "name", "description", "map", "robots", "targets", "hazard",
                       "motion", "horizon", "monte_carlo", "caps"});
  Scenario s;
  s.version = small_int(field(doc, "", "version"), "/version");
  if (s.version != kScenarioVersion) {
    fail("/version", "unsupported version " + std::to_string(s.version));
  }
  if (const json* v = optional_field(doc, "name")) s.name = text(*v, "/name");
  if (const json* v = optional_field(doc, "description")) s.description = text(*v, "/description");

  MapCheck check{0, 0, {}};
  parse_map(doc, s, check);

  const json& robots = array_at(field(doc, "", "robots"), "/robots");
  if (robots.empty()) fail("/robots", "at least one robot is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < robots.size(); ++i) {
    const std::string p = "/robots/" + std::to_string(i);
    const json& r = object_at(robots[i], p);
    check_keys(r, p, {"name", "start"});
    RobotSpec spec;
    spec.name = text(field(r, p, "name"), p + "/name");
    if (!names.insert(spec.name).second) fail(p + "/name", "duplicate robot name '" + spec.name + "'");
    spec.start = cell(field(r, p, "start"), p + "/start");
    check.free(spec.start, p + "/start");
    s.robots.push_back(spec);
  }

  const json& targets = array_at(field(doc, "", "targets"), "/targets");
  if (targets.size() > 20) fail("/targets", "at most 20 targets are supported");
  std::set<std::string> labels;
  std::set<Cell> target_cells;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string p = "/targets/" + std::to_string(i);
    const json& t = object_at(targets[i], p);
    check_keys(t, p, {"label", "cell"});
    TargetSpec spec;
    spec.label = text(field(t, p, "label"), p + "/label");
    if (!labels.insert(spec.label).second) fail(p + "/label", "duplicate target label '" + spec.label + "'");
    spec.cell = cell(field(t, p, "cell"), p + "/cell");
    check.free(spec.cell, p + "/cell");
    if (!target_cells.insert(spec.cell).second) {
      fail(p + "/cell", "another target already occupies " + to_string(spec.cell));
    }
    s.targets.push_back(spec);
  }

  const json& hazard = object_at(field(doc, "", "hazard"), "/hazard");
  check_keys(hazard, "/hazard", {"default_theta", "sources"});
  s.default_theta = probability(field(hazard, "/hazard", "default_theta"), "/hazard/default_theta");
  const json& sources = array_at(field(hazard, "/hazard", "sources"), "/hazard/sources");
  std::set<std::string> source_labels;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const std::string p = "/hazard/sources/" + std::to_string(i);
    const json& h = object_at(sources[i], p);
    check_keys(h, p, {"label", "cell", "theta"});
    HazardSource src;
    src.label = text(field(h, p, "label"), p + "/label");
    if (!source_labels.insert(src.label).second) fail(p + "/label", "duplicate source label '" + src.label + "'");
    src.cell = cell(field(h, p, "cell"), p + "/cell");
    check.free(src.cell, p + "/cell");
    const json* th = optional_field(h, "theta");
    src.theta = th ? probability(*th, p + "/theta") : s.default_theta;
    s.sources.push_back(src);
  }

  parse_motion(doc, s, check);

  s.horizon = small_int(field(doc, "", "horizon"), "/horizon");
  if (s.horizon < 1) fail("/horizon", "must be at least 1");

  if (const json* mc = optional_field(doc, "monte_carlo")) {
    object_at(*mc, "/monte_carlo");
    check_keys(*mc, "/monte_carlo", {"samples", "seed"});
    if (const json* v = optional_field(*mc, "samples")) {
      const long long n = integer(*v, "/monte_carlo/samples");
      if (n < 1) fail("/monte_carlo/samples", "must be at least 1");
      s.samples = static_cast<std::size_t>(n);
    }
    if (const json* v = optional_field(*mc, "seed")) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        fail("/monte_carlo/seed", "expected a nonnegative integer");
      }
      s.seed = v->get<std::uint64_t>();
    }
  }
  if (const json* caps = optional_field(doc, "caps")) {
    object_at(*caps, "/caps");
    check_keys(*caps, "/caps", {"exact_hazard_cells", "brute_force", "exact_ratio_work"});
    if (const json* v = optional_field(*caps, "exact_hazard_cells")) {
      const long long n = integer(*v, "/caps/exact_hazard_cells");
      if (n < 0) fail("/caps/exact_hazard_cells", "must be nonnegative");
      s.caps.exact_hazard_cells = static_cast<std::size_t>(n);
    }
    if (const json* v = optional_field(*caps, "brute_force")) {
      s.caps.brute_force = number(*v, "/caps/brute_force");
      if (s.caps.brute_force < 0) fail("/caps/brute_force", "must be nonnegative");
    }
    if (const json* v = optional_field(*caps, "exact_ratio_work")) {
      s.caps.exact_ratio_work = number(*v, "/caps/exact_ratio_work");
      if (s.caps.exact_ratio_work < 0) fail("/caps/exact_ratio_work", "must be nonnegative");
    }
  }

  // Cross-field checks the map classes would reject with less context.
  try {
    const GridMap map = s.make_map();
    (void)s.make_motion(map);
  } catch (const ValidationError& e) {
    fail(s.motion.kind == MotionKind::Tabular ? "/motion" : "/map", e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open scenario file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  try {
    return parse_scenario(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ":" + e.what());
  }
}

// ------------------------------------------------------------- serializing

namespace {

json cell_json(Cell c) { return json::array({c.col, c.row}); }

}  // namespace

json to_json(const Scenario& s) {
  json doc;
  doc["version"] = s.version;
  if (!s.name.empty()) doc["name"] = s.name;
  if (!s.description.empty()) doc["description"] = s.description;

  json map;
  map["width"] = s.width;
  map["height"] = s.height;
  map["goal"] = cell_json(s.goal);
  json obstacles = json::object();
  if (!s.obstacle_cells.empty()) {
    json cells = json::array();
    for (Cell c : s.obstacle_cells) cells.push_back(cell_json(c));
    obstacles["cells"] = std::move(cells);
  }
  if (!s.obstacle_rects.empty()) {
    json rects = json::array();
    for (const CellRect& r : s.obstacle_rects) {
      rects.push_back({{"min", cell_json(r.min)}, {"max", cell_json(r.max)}});
    }
    obstacles["rects"] = std::move(rects);
  }
  if (!obstacles.empty()) map["obstacles"] = std::move(obstacles);
  doc["map"] = std::move(map);

  json robots = json::array();
  for (const RobotSpec& r : s.robots) robots.push_back({{"name", r.name}, {"start", cell_json(r.start)}});
  doc["robots"] = std::move(robots);

  json targets = json::array();
  for (const TargetSpec& t : s.targets) targets.push_back({{"label", t.label}, {"cell", cell_json(t.cell)}});
  doc["targets"] = std::move(targets);

  json sources = json::array();
  for (const HazardSource& h : s.sources) {
    sources.push_back({{"label", h.label}, {"cell", cell_json(h.cell)}, {"theta", h.theta}});
  }
  doc["hazard"] = {{"default_theta", s.default_theta}, {"sources", std::move(sources)}};

  json motion;
  motion["kind"] = to_string(s.motion.kind);
  if (s.motion.kind == MotionKind::Slip) motion["p_intended"] = s.motion.p_intended;
  if (s.motion.kind == MotionKind::Tabular) {
    json entries = json::array();
    for (const MotionEntry& e : s.motion.entries) {
      json outs = json::array();
      for (const auto& [to, p] : e.outcomes) outs.push_back({{"cell", cell_json(to)}, {"p", p}});
      entries.push_back({{"cell", cell_json(e.cell)},
                         {"action", std::string(to_string(e.action))},
                         {"outcomes", std::move(outs)}});
    }
    motion["entries"] = std::move(entries);
  }
  doc["motion"] = std::move(motion);

  doc["horizon"] = s.horizon;
  doc["monte_carlo"] = {{"samples", s.samples}, {"seed", s.seed}};
  doc["caps"] = {{"exact_hazard_cells", s.caps.exact_hazard_cells},
                 {"brute_force", s.caps.brute_force},
                 {"exact_ratio_work", s.caps.exact_ratio_work}};
  return doc;
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
  std::ofstream out(path);
  if (!out) throw ValidationError(path.string() + ": cannot write scenario file");
  out << to_json(s).dump(2) << '\n';
}

std::string scenario_hash(const Scenario& s) {
  const std::string canonical = to_json(s).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool operator==(const Scenario& a, const Scenario& b) { return to_json(a) == to_json(b); }

}  // namespace safeplan

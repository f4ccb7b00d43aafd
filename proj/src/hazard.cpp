#include "safeplan/hazard.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>

#include "safeplan/error.hpp"
#include "safeplan/parallel.hpp"

namespace safeplan {

// ----------------------------------------------------------------- CellSet

CellSet CellSet::from_cells(const GridMap& map, std::span<const Cell> cells) {
  CellSet set(map.free_count());
  for (const Cell& c : cells) set.insert(map.require_free(c));
  return set;
}

CellSet CellSet::from_mask(std::size_t universe, std::uint64_t mask) {
  CellSet set(universe);
  for (std::size_t i = 0; i < universe && i < 64; ++i) {
    if ((mask >> i) & 1u) set.insert(static_cast<int>(i));
  }
  return set;
}

std::size_t CellSet::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool CellSet::is_subset_of(const CellSet& other) const {
  if (other.universe() != universe()) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

std::vector<int> CellSet::indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<Cell> CellSet::cells(const GridMap& map) const {
  std::vector<Cell> out;
  for (int i : indices()) out.push_back(map.cell_at(i));
  return out;
}

std::uint64_t CellSet::to_mask() const {
  if (bits_.size() > 64) throw CapExceeded("cell set has more than 64 cells");
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) mask |= std::uint64_t{1} << i;
  }
  return mask;
}

// ------------------------------------------------------------- HazardModel

HazardModel::HazardModel(const GridMap& map, std::vector<HazardSource> sources,
                         double default_theta)
    : sources_(std::move(sources)), default_theta_(default_theta), initial_(map.free_count()) {
  if (!(default_theta >= 0.0 && default_theta <= 1.0)) {
    throw ValidationError("default spread speed must lie in [0,1]");
  }
  for (const HazardSource& s : sources_) {
    if (!(s.theta >= 0.0 && s.theta <= 1.0)) {
      throw ValidationError("hazard source " + s.label + ": spread speed " +
                            std::to_string(s.theta) + " is outside [0,1]");
    }
    if (!map.is_free(s.cell)) {
      throw ValidationError("hazard source " + s.label + " at " + to_string(s.cell) +
                            " is not a free cell");
    }
    initial_.insert(map.free_index(s.cell));
  }

  // Multi-source BFS; sources are seeded in order so ties go to the lower index.
  const std::size_t n = map.free_count();
  theta_.assign(n, default_theta);
  std::vector<int> owner(n, -1);
  std::deque<int> queue;
  for (std::size_t s = 0; s < sources_.size(); ++s) {
    const int i = map.free_index(sources_[s].cell);
    if (owner[static_cast<std::size_t>(i)] >= 0) continue;
    owner[static_cast<std::size_t>(i)] = static_cast<int>(s);
    queue.push_back(i);
  }
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    for (int j : map.orthogonal_neighbors(i)) {
      if (owner[static_cast<std::size_t>(j)] >= 0) continue;
      owner[static_cast<std::size_t>(j)] = owner[static_cast<std::size_t>(i)];
      queue.push_back(j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] >= 0) theta_[i] = sources_[static_cast<std::size_t>(owner[i])].theta;
  }
}

HazardModel HazardModel::uniform(const GridMap& map, std::span<const Cell> initial, double theta) {
  std::vector<HazardSource> sources;
  for (std::size_t i = 0; i < initial.size(); ++i) {
    sources.push_back({"s" + std::to_string(i), initial[i], theta});
  }
  return HazardModel(map, std::move(sources), theta);
}

// ---------------------------------------------------------- one-step model

namespace {

const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

template <typename Contaminated>
double clear_prob_at(const GridMap& map, const HazardModel& model, int x, Contaminated&& in_y) {
  double p = 1.0;
  for (int j : map.orthogonal_neighbors(x)) {
    if (in_y(j)) p *= 1.0 - model.theta_at(j);
  }
  for (int j : map.diagonal_neighbors(x)) {
    if (in_y(j)) p *= 1.0 - model.theta_at(j) * kInvSqrt2;
  }
  return p;
}

void check_universe(const GridMap& map, const CellSet& y) {
  if (y.universe() != map.free_count()) {
    throw ValidationError("hazard state does not match the map's free cells");
  }
}

void check_cap(const GridMap& map, std::size_t cell_cap) {
  if (map.free_count() > cell_cap || map.free_count() > 63) {
    throw CapExceeded("exact hazard propagation needs at most " + std::to_string(cell_cap) +
                      " free cells, map has " + std::to_string(map.free_count()));
  }
}

double clear_prob_mask(const GridMap& map, const HazardModel& model, int x, std::uint64_t mask) {
  return clear_prob_at(map, model, x, [mask](int j) { return ((mask >> j) & 1u) != 0; });
}

}  // namespace

double remain_clear_prob(const GridMap& map, const HazardModel& model, Cell x, const CellSet& y) {
  check_universe(map, y);
  const int i = map.require_free(x);
  if (y.contains(i)) {
    throw ValidationError("remain_clear_prob: cell " + to_string(x) + " is already contaminated");
  }
  return clear_prob_at(map, model, i, [&y](int j) { return y.contains(j); });
}

double contaminate_prob(const GridMap& map, const HazardModel& model, Cell x, const CellSet& y) {
  check_universe(map, y);
  const int i = map.require_free(x);
  if (y.contains(i)) return 1.0;
  return 1.0 - clear_prob_at(map, model, i, [&y](int j) { return y.contains(j); });
}

CellSet hazard_step_sample(const GridMap& map, const HazardModel& model, const CellSet& y,
                           Engine& rng) {
  check_universe(map, y);
  CellSet next = y;
  const auto n = static_cast<int>(map.free_count());
  for (int x = 0; x < n; ++x) {
    if (y.contains(x)) continue;
    const double ignite = 1.0 - clear_prob_at(map, model, x, [&y](int j) { return y.contains(j); });
    if (ignite > 0.0 && uniform01(rng) < ignite) next.insert(x);
  }
  return next;
}

HazardDistribution hazard_step_exact(const GridMap& map, const HazardModel& model,
                                     const HazardDistribution& dist, std::size_t cell_cap) {
  check_cap(map, cell_cap);
  const auto n = static_cast<int>(map.free_count());
  HazardDistribution out;
  std::vector<std::pair<std::uint64_t, double>> branches;
  for (const auto& [mask, mass] : dist) {
    if (mass == 0.0) continue;
    branches.assign(1, {mask, mass});
    for (int x = 0; x < n; ++x) {
      if ((mask >> x) & 1u) continue;
      const double ignite = 1.0 - clear_prob_mask(map, model, x, mask);
      if (ignite <= 0.0) continue;
      const std::uint64_t bit = std::uint64_t{1} << x;
      if (ignite >= 1.0) {
        for (auto& b : branches) b.first |= bit;
        continue;
      }
      const std::size_t size = branches.size();
      for (std::size_t i = 0; i < size; ++i) {
        branches.push_back({branches[i].first | bit, branches[i].second * ignite});
        branches[i].second *= 1.0 - ignite;
      }
    }
    for (const auto& [m, p] : branches) {
      if (p > 0.0) out[m] += p;
    }
  }
  return out;
}

// ------------------------------------------------------ ContaminationField

ContaminationField::ContaminationField(const GridMap& map, int horizon)
    : horizon_(horizon), cells_(map.free_count()) {
  if (horizon < 1) throw ValidationError("contamination field horizon must be at least 1");
  probs_.assign(static_cast<std::size_t>(horizon) * cells_ * kMoves.size(), 0.0);
  flags_.assign(static_cast<std::size_t>(horizon) * cells_, 0);
  slot_valid_.assign(cells_ * kMoves.size(), 0);
  for (std::size_t i = 0; i < cells_; ++i) {
    for (Move d : kMoves) {
      slot_valid_[slot(static_cast<int>(i), d)] = map.step(static_cast<int>(i), d) >= 0 ? 1 : 0;
    }
  }
}

double ContaminationField::prob(const GridMap& map, int k, Cell to, Cell from) const {
  if (k < 0 || k >= horizon_) throw ValidationError("contamination field: step out of range");
  const int i = map.require_free(from);
  for (Move d : kMoves) {
    if (from + displacement(d) == to && has_slot(i, d)) return prob(k, i, d);
  }
  throw ValidationError("contamination field: " + to_string(to) + " is not a free neighbour of " +
                        to_string(from));
}

void ContaminationField::set(int k, int from, Move d, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw NumericViolation("contamination probability " + std::to_string(p) + " outside [0,1]");
  }
  if (!has_slot(from, d)) throw ValidationError("contamination field: no such neighbour slot");
  probs_[index(k, from, d)] = p;
}

void ContaminationField::set_flag(int k, int from, bool value) {
  flags_[flag_index(k, from)] = value ? 1 : 0;
}

std::size_t ContaminationField::flagged_count() const {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

double ContaminationField::max_abs_difference(const ContaminationField& other) const {
  if (other.probs_.size() != probs_.size()) {
    throw ValidationError("contamination fields have different shapes");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    worst = std::max(worst, std::abs(probs_[i] - other.probs_[i]));
  }
  return worst;
}

// ------------------------------------------------------------- Monte-Carlo

namespace {

struct Counts {
  std::vector<std::uint64_t> clear;  // (k, x)
  std::vector<std::uint64_t> joint;  // (k, x, d)
  std::vector<std::uint64_t> final_hits;  // x

  Counts(std::size_t horizon, std::size_t cells)
      : clear(horizon * cells, 0), joint(horizon * cells * kMoves.size(), 0), final_hits(cells, 0) {}

  void add(const Counts& o) {
    for (std::size_t i = 0; i < clear.size(); ++i) clear[i] += o.clear[i];
    for (std::size_t i = 0; i < joint.size(); ++i) joint[i] += o.joint[i];
    for (std::size_t i = 0; i < final_hits.size(); ++i) final_hits[i] += o.final_hits[i];
  }
};

}  // namespace

HazardEstimate estimate_hazard(const GridMap& map, const HazardModel& model, int horizon,
                               std::size_t samples, std::uint64_t seed, int threads) {
  if (samples < 1) throw ValidationError("Monte-Carlo estimation needs at least one sample");
  if (horizon < 1) throw ValidationError("Monte-Carlo estimation needs a horizon of at least 1");
  const std::size_t n = map.free_count();
  const auto N = static_cast<std::size_t>(horizon);
  const std::size_t workers = worker_count(samples, threads);
  std::vector<Counts> partial(workers, Counts(N, n));

  parallel_blocks(samples, threads, [&](std::size_t begin, std::size_t end, std::size_t w) {
    Counts& c = partial[w];
    CellSet y(n);
    for (std::size_t s = begin; s < end; ++s) {
      Engine rng = make_stream(seed, s);
      y = model.initial();
      for (std::size_t k = 0; k < N; ++k) {
        CellSet next = hazard_step_sample(map, model, y, rng);
        for (std::size_t x = 0; x < n; ++x) {
          if (y.contains(static_cast<int>(x))) continue;
          ++c.clear[k * n + x];
          for (Move d : kMoves) {
            const int j = map.step(static_cast<int>(x), d);
            if (j >= 0 && next.contains(j)) {
              ++c.joint[(k * n + x) * kMoves.size() + static_cast<std::size_t>(d)];
            }
          }
        }
        y = std::move(next);
      }
      for (std::size_t x = 0; x < n; ++x) {
        if (y.contains(static_cast<int>(x))) ++c.final_hits[x];
      }
    }
  });

  Counts total(N, n);
  for (const Counts& c : partial) total.add(c);

  HazardEstimate est{ContaminationField(map, horizon), std::vector<double>(n, 0.0), samples};
  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t x = 0; x < n; ++x) {
      const std::uint64_t denom = total.clear[k * n + x];
      const auto xi = static_cast<int>(x);
      if (denom == 0) est.field.set_flag(static_cast<int>(k), xi, true);
      for (Move d : kMoves) {
        if (!est.field.has_slot(xi, d)) continue;
        const std::uint64_t num = total.joint[(k * n + x) * kMoves.size() + static_cast<std::size_t>(d)];
        const double p = denom == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(denom);
        est.field.set(static_cast<int>(k), xi, d, p);
      }
    }
  }
  for (std::size_t x = 0; x < n; ++x) {
    est.heatmap[x] = static_cast<double>(total.final_hits[x]) / static_cast<double>(samples);
  }
  return est;
}

ContaminationField estimate_contamination_field(const GridMap& map, const HazardModel& model,
                                                int horizon, std::size_t samples,
                                                std::uint64_t seed, int threads) {
  return estimate_hazard(map, model, horizon, samples, seed, threads).field;
}

std::vector<double> contamination_heatmap(const GridMap& map, const HazardModel& model,
                                          int horizon, std::size_t samples, std::uint64_t seed,
                                          int threads) {
  return estimate_hazard(map, model, horizon, samples, seed, threads).heatmap;
}

// ------------------------------------------------------------------- exact

ContaminationField exact_contamination_field(const GridMap& map, const HazardModel& model,
                                             int horizon, std::size_t cell_cap) {
  check_cap(map, cell_cap);
  const auto n = static_cast<int>(map.free_count());
  ContaminationField field(map, horizon);
  HazardDistribution dist{{model.initial().to_mask(), 1.0}};
  std::vector<double> clear(static_cast<std::size_t>(n));
  std::vector<double> joint(static_cast<std::size_t>(n) * kMoves.size());

  for (int k = 0; k < horizon; ++k) {
    std::fill(clear.begin(), clear.end(), 0.0);
    std::fill(joint.begin(), joint.end(), 0.0);
    for (const auto& [mask, mass] : dist) {
      for (int x = 0; x < n; ++x) {
        if ((mask >> x) & 1u) continue;
        clear[static_cast<std::size_t>(x)] += mass;
        for (Move d : kMoves) {
          const int j = map.step(x, d);
          if (j < 0) continue;
          // Cells ignite independently given y^k, so the marginal is p_c(x'|y^k).
          const double pc =
              ((mask >> j) & 1u) ? 1.0 : 1.0 - clear_prob_mask(map, model, j, mask);
          joint[static_cast<std::size_t>(x) * kMoves.size() + static_cast<std::size_t>(d)] +=
              mass * pc;
        }
      }
    }
    for (int x = 0; x < n; ++x) {
      const double denom = clear[static_cast<std::size_t>(x)];
      if (denom == 0.0) field.set_flag(k, x, true);
      for (Move d : kMoves) {
        if (!field.has_slot(x, d)) continue;
        const double num =
            joint[static_cast<std::size_t>(x) * kMoves.size() + static_cast<std::size_t>(d)];
        field.set(k, x, d, denom == 0.0 ? 1.0 : std::clamp(num / denom, 0.0, 1.0));
      }
    }
    dist = hazard_step_exact(map, model, dist, cell_cap);
  }
  return field;
}

std::vector<double> exact_contamination_marginals(const GridMap& map, const HazardModel& model,
                                                  int horizon, std::size_t cell_cap) {
  check_cap(map, cell_cap);
  HazardDistribution dist{{model.initial().to_mask(), 1.0}};
  for (int k = 0; k < horizon; ++k) dist = hazard_step_exact(map, model, dist, cell_cap);
  std::vector<double> out(map.free_count(), 0.0);
  for (const auto& [mask, mass] : dist) {
    for (std::size_t x = 0; x < out.size(); ++x) {
      if ((mask >> x) & 1u) out[x] += mass;
    }
  }
  return out;
}

// -------------------------------------------------------------- file cache

namespace {

constexpr char kMagic[8] = {'S', 'P', 'H', 'F', 'I', 'E', 'L', 'D'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

std::string field_cache_filename(const FieldCacheKey& key) {
  return "field-" + key.scenario_hash + "-N" + std::to_string(key.horizon) + "-M" +
         std::to_string(key.samples) + "-s" + std::to_string(key.seed) + ".bin";
}

void save_hazard_estimate(const std::filesystem::path& path, const FieldCacheKey& key,
                          const HazardEstimate& estimate) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write field cache " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCacheVersion);
  write_pod(out, static_cast<std::uint64_t>(key.scenario_hash.size()));
  out.write(key.scenario_hash.data(), static_cast<std::streamsize>(key.scenario_hash.size()));
  write_pod(out, static_cast<std::int32_t>(key.horizon));
  write_pod(out, static_cast<std::uint64_t>(key.samples));
  write_pod(out, key.seed);
  write_pod(out, static_cast<std::uint64_t>(estimate.field.cell_count()));
  const auto probs = estimate.field.raw();
  const auto flags = estimate.field.raw_flags();
  out.write(reinterpret_cast<const char*>(probs.data()),
            static_cast<std::streamsize>(probs.size_bytes()));
  out.write(reinterpret_cast<const char*>(flags.data()),
            static_cast<std::streamsize>(flags.size_bytes()));
  out.write(reinterpret_cast<const char*>(estimate.heatmap.data()),
            static_cast<std::streamsize>(estimate.heatmap.size() * sizeof(double)));
}

std::optional<HazardEstimate> load_hazard_estimate(const std::filesystem::path& path,
                                                   const FieldCacheKey& key,
                                                   const GridMap& map) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    return std::nullopt;
  }
  std::uint32_t version = 0;
  std::uint64_t hash_len = 0;
  if (!read_pod(in, version) || version != kCacheVersion || !read_pod(in, hash_len) ||
      hash_len > 1024) {
    return std::nullopt;
  }
  std::string hash(hash_len, '\0');
  std::int32_t horizon = 0;
  std::uint64_t samples = 0, seed = 0, cells = 0;
  if (!in.read(hash.data(), static_cast<std::streamsize>(hash_len)) || !read_pod(in, horizon) ||
      !read_pod(in, samples) || !read_pod(in, seed) || !read_pod(in, cells)) {
    return std::nullopt;
  }
  const FieldCacheKey stored{hash, horizon, static_cast<std::size_t>(samples), seed};
  if (!(stored == key) || cells != map.free_count() || horizon < 1) return std::nullopt;

  HazardEstimate est{ContaminationField(map, horizon), std::vector<double>(cells, 0.0),
                     static_cast<std::size_t>(samples)};
  std::vector<double> probs(est.field.raw().size());
  std::vector<std::uint8_t> flags(est.field.raw_flags().size());
  if (!in.read(reinterpret_cast<char*>(probs.data()),
               static_cast<std::streamsize>(probs.size() * sizeof(double))) ||
      !in.read(reinterpret_cast<char*>(flags.data()), static_cast<std::streamsize>(flags.size())) ||
      !in.read(reinterpret_cast<char*>(est.heatmap.data()),
               static_cast<std::streamsize>(est.heatmap.size() * sizeof(double)))) {
    return std::nullopt;
  }
  std::size_t idx = 0;
  for (int k = 0; k < horizon; ++k) {
    for (std::size_t x = 0; x < cells; ++x) {
      const auto xi = static_cast<int>(x);
      est.field.set_flag(k, xi, flags[static_cast<std::size_t>(k) * cells + x] != 0);
      for (Move d : kMoves) {
        const double p = probs[idx++];
        if (est.field.has_slot(xi, d)) est.field.set(k, xi, d, p);
      }
    }
  }
  return est;
}

}  // namespace safeplan

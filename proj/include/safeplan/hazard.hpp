#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safeplan/gridmap.hpp"
#include "safeplan/rng.hpp"

namespace safeplan {

/// Subset of a map's free cells, indexed by free index.
class CellSet {
 public:
  CellSet() = default;
  explicit CellSet(std::size_t universe) : bits_(universe, 0) {}
  static CellSet from_cells(const GridMap& map, std::span<const Cell> cells);
  static CellSet from_mask(std::size_t universe, std::uint64_t mask);

  std::size_t universe() const { return bits_.size(); }
  bool contains(int i) const { return bits_[static_cast<std::size_t>(i)] != 0; }
  void insert(int i) { bits_[static_cast<std::size_t>(i)] = 1; }
  std::size_t count() const;
  bool is_subset_of(const CellSet& other) const;
  std::vector<int> indices() const;
  std::vector<Cell> cells(const GridMap& map) const;
  /// Bitmask encoding; requires universe() <= 64.
  std::uint64_t to_mask() const;

  friend bool operator==(const CellSet&, const CellSet&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct HazardSource {
  std::string label;
  Cell cell;
  double theta;
};

/// Neighbourhood-based spread model.
///
/// Every initially contaminated cell is a source. A contaminated cell ignites
/// each orthogonal free neighbour with probability theta and each diagonal free
/// neighbour with probability theta / sqrt(2), independently. With per-source
/// speeds, a cell spreads at the speed of its nearest source (orthogonal path
/// distance over free cells, ties to the lower source index); cells no source
/// can reach use the default speed.
class HazardModel {
 public:
  HazardModel(const GridMap& map, std::vector<HazardSource> sources, double default_theta);
  /// All sources share one spread speed.
  static HazardModel uniform(const GridMap& map, std::span<const Cell> initial, double theta);

  const std::vector<HazardSource>& sources() const { return sources_; }
  const CellSet& initial() const { return initial_; }
  double default_theta() const { return default_theta_; }
  double theta_at(int cell) const { return theta_[static_cast<std::size_t>(cell)]; }

 private:
  std::vector<HazardSource> sources_;
  double default_theta_;
  CellSet initial_;
  std::vector<double> theta_;
};

/// p_nc(x | y): probability that the clear cell x stays clear for one step.
double remain_clear_prob(const GridMap& map, const HazardModel& model, Cell x, const CellSet& y);
/// p_c(x | y): 1 for x in y, else 1 - p_nc(x | y).
double contaminate_prob(const GridMap& map, const HazardModel& model, Cell x, const CellSet& y);

/// One draw of y^{k+1} ~ tau_Y(. | y).
CellSet hazard_step_sample(const GridMap& map, const HazardModel& model, const CellSet& y,
                           Engine& rng);

/// Probability distribution over hazard states encoded as free-cell bitmasks.
using HazardDistribution = std::map<std::uint64_t, double>;

inline constexpr std::size_t kDefaultExactCellCap = 12;

/// Exact pushforward of `dist` through tau_Y. Throws CapExceeded when the map
/// has more than `cell_cap` free cells.
HazardDistribution hazard_step_exact(const GridMap& map, const HazardModel& model,
                                     const HazardDistribution& dist,
                                     std::size_t cell_cap = kDefaultExactCellCap);

/// Time-indexed contamination probabilities p_H^k(x', x) for x' in {x} + N(x).
///
/// Entry (k, x, d) is the probability that x + d_d is contaminated at k + 1
/// given that x is clear at k. Cells that are almost surely contaminated at k
/// have no defined conditional; their entries are 1 and the (k, x) pair is
/// flagged.
class ContaminationField {
 public:
  ContaminationField(const GridMap& map, int horizon);

  int horizon() const { return horizon_; }
  std::size_t cell_count() const { return cells_; }

  bool has_slot(int from, Move d) const { return slot_valid_[slot(from, d)] != 0; }
  double prob(int k, int from, Move d) const { return probs_[index(k, from, d)]; }
  /// p_H^k(to, from); throws ValidationError when `to` is not in {from} + N(from).
  double prob(const GridMap& map, int k, Cell to, Cell from) const;
  void set(int k, int from, Move d, double p);

  bool flagged(int k, int from) const { return flags_[flag_index(k, from)] != 0; }
  void set_flag(int k, int from, bool value);
  std::size_t flagged_count() const;

  /// Largest absolute entry-wise difference; fields must have equal shape.
  double max_abs_difference(const ContaminationField& other) const;

  std::span<const double> raw() const { return probs_; }
  std::span<const std::uint8_t> raw_flags() const { return flags_; }

  friend bool operator==(const ContaminationField&, const ContaminationField&) = default;

 private:
  std::size_t slot(int from, Move d) const {
    return static_cast<std::size_t>(from) * kMoves.size() + static_cast<std::size_t>(d);
  }
  std::size_t index(int k, int from, Move d) const {
    return static_cast<std::size_t>(k) * cells_ * kMoves.size() + slot(from, d);
  }
  std::size_t flag_index(int k, int from) const {
    return static_cast<std::size_t>(k) * cells_ + static_cast<std::size_t>(from);
  }

  int horizon_;
  std::size_t cells_;
  std::vector<double> probs_;
  std::vector<std::uint8_t> flags_;
  std::vector<std::uint8_t> slot_valid_;
};

/// Monte-Carlo statistics of M forward-propagated hazard trajectories.
struct HazardEstimate {
  ContaminationField field;
  std::vector<double> heatmap;  // per free cell: fraction of samples with x in y^N
  std::size_t samples;
};

/// Forward-propagates `samples` trajectories of length `horizon` from y^0.
/// Sample i draws from stream_seed(seed, i); counts are summed as integers,
/// so the result is bitwise identical for every thread count.
HazardEstimate estimate_hazard(const GridMap& map, const HazardModel& model, int horizon,
                               std::size_t samples, std::uint64_t seed, int threads = 1);

ContaminationField estimate_contamination_field(const GridMap& map, const HazardModel& model,
                                                int horizon, std::size_t samples,
                                                std::uint64_t seed, int threads = 1);

/// Per free cell: empirical P(x in y^N).
std::vector<double> contamination_heatmap(const GridMap& map, const HazardModel& model,
                                          int horizon, std::size_t samples, std::uint64_t seed,
                                          int threads = 1);

/// Oracle by exhaustive distribution propagation (small maps only).
ContaminationField exact_contamination_field(const GridMap& map, const HazardModel& model,
                                             int horizon,
                                             std::size_t cell_cap = kDefaultExactCellCap);

/// Exact per-cell P(x in y^N).
std::vector<double> exact_contamination_marginals(const GridMap& map, const HazardModel& model,
                                                  int horizon,
                                                  std::size_t cell_cap = kDefaultExactCellCap);

/// Key of a cached contamination field.
struct FieldCacheKey {
  std::string scenario_hash;
  int horizon;
  std::size_t samples;
  std::uint64_t seed;

  friend bool operator==(const FieldCacheKey&, const FieldCacheKey&) = default;
};

/// Sidecar file name for a key, e.g. "field-<hash>-N75-M10000-s0.bin".
std::string field_cache_filename(const FieldCacheKey& key);
void save_hazard_estimate(const std::filesystem::path& path, const FieldCacheKey& key,
                          const HazardEstimate& estimate);
/// Returns nullopt when the file is missing, malformed, or written under another key.
std::optional<HazardEstimate> load_hazard_estimate(const std::filesystem::path& path,
                                                   const FieldCacheKey& key,
                                                   const GridMap& map);

}  // namespace safeplan

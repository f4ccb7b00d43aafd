#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safeplan/alloc.hpp"

namespace safeplan {

/// (A, B, e) with A subset of B and e outside B, over the ground set W = T x R.
struct Triple {
  GroundSet a = 0;
  GroundSet b = 0;
  int e = -1;  // ground index
};

enum class RatioKind { Exact, GreedyApproximate };

/// Curvature alpha and submodularity ratio gamma of F over W.
///
/// alpha is the largest 1 - dA / dB over triples with dB < 0, gamma the
/// smallest dB / dA over triples with dA < 0, where dX = F(X + e) - F(X). Both
/// are clamped to [0, 1]; without any qualifying triple they keep the modular
/// values alpha = 0, gamma = 1.
struct RatioReport {
  RatioKind kind = RatioKind::Exact;
  double alpha = 0.0;
  double gamma = 1.0;
  std::optional<Triple> alpha_witness;
  std::optional<Triple> gamma_witness;
  std::size_t triples = 0;         // triples inspected
  std::size_t alpha_skipped = 0;   // dB = 0: no constraint on alpha
  std::size_t gamma_skipped = 0;   // dA = 0: no constraint on gamma
  std::size_t clamped = 0;         // raw ratio outside [0, 1]
  std::size_t nonmonotone = 0;     // triples with a positive marginal
  bool feasible_only = false;      // restricted to sets giving each task at most one robot
  bool insufficient = false;       // greedy kind: no comparable observations
  std::vector<std::string> notes;
};

inline constexpr double kDefaultExactRatioCap = 1e7;

/// Work 3^|W| * |W| of an exact enumeration.
double exact_ratio_work(int ground_size);

/// Exact ratios from the values of F on all 2^w subsets of W (table[A] = F(A)).
/// `tasks` is |T|, needed to decode pairs when `feasible_only` is set.
RatioReport exact_ratios_from_table(std::span<const double> table, int w, int tasks,
                                    bool feasible_only = false,
                                    double cap = kDefaultExactRatioCap, int threads = 1);

/// Exact ratios of the ground extension of `cache`. Throws CapExceeded when
/// 3^|W| * |W| exceeds `cap`.
RatioReport exact_ratios(ObjectiveCache& cache, bool feasible_only = false,
                         double cap = kDefaultExactRatioCap, int threads = 1);

/// F on every subset of W, indexed by ground-set bitmask.
std::vector<double> ground_table(ObjectiveCache& cache, int threads = 1);

/// Greedy-approximate ratios from the f values recorded in `traces`.
///
/// Candidate sets are the allocation states visited by the greedy chains.
/// Every nested pair P subset Q of such states and every e outside Q whose four
/// F values can be assembled from recorded evaluations contributes one triple,
/// so the result is a restriction of the exact enumeration: alpha^G <= alpha
/// and gamma^G >= gamma.
RatioReport greedy_ratios(std::span<const GreedyTrace> traces, int robots, int tasks,
                          bool feasible_only = false);

struct GuaranteeReport {
  double f_empty = 0.0;  // F({empty}_r)
  double f_full = 0.0;   // F({T}_r)
  double f_star = 0.0;
  double f_fg = 0.0;
  double f_rg = 0.0;
  double alpha = 0.0;
  double gamma = 1.0;

  bool vacuous = false;  // alpha = 1 or gamma = 0
  std::string vacuous_reason;

  // Normalized forms, which take F({empty}) = 1 and F({T}) = 0.
  std::optional<double> g_fg;
  std::optional<double> g_rg;
  // Lower bounds with the instance's own F({empty}) and F({T}).
  std::optional<double> bound_fg;
  std::optional<double> bound_rg;

  // Cross-multiplied forms: forward  c * (F_fg - F_empty) >= F* - F_empty, c = gamma (1 - alpha);
  // reverse gamma * (F* - F_full) <= (1 + gamma alpha) (F_rg - F_full).
  double fg_inequality_lhs = 0.0;
  double fg_inequality_rhs = 0.0;
  bool fg_inequality_holds = false;
  double rg_inequality_lhs = 0.0;
  double rg_inequality_rhs = 0.0;
  bool rg_inequality_holds = false;

  bool fg_below_optimum = false;  // F_fg <= F*
  bool rg_below_optimum = false;  // F_rg <= F*
};

/// Absolute slack of the inequality checks, absorbing rounding in the products.
inline constexpr double kGuaranteeSlack = 1e-12;

/// Evaluates both guarantees and flags vacuous inputs instead of throwing.
/// Throws ValidationError when alpha or gamma lies outside [0, 1].
GuaranteeReport evaluate_guarantees(double f_empty, double f_full, double f_star, double f_fg,
                                    double f_rg, double alpha, double gamma);

/// As evaluate_guarantees, but throws VacuousBound when alpha = 1 or gamma = 0.
GuaranteeReport strict_guarantees(double f_empty, double f_full, double f_star, double f_fg,
                               double f_rg, double alpha, double gamma);

/// Normalized lower bound on the forward greedy: F*/c + (c - 1)/c with c = gamma (1 - alpha).
double forward_guarantee(double alpha, double gamma, double f_star);
/// Normalized lower bound on the reverse greedy: F* gamma / (1 + gamma alpha).
double reverse_guarantee(double alpha, double gamma, double f_star);

/// Grid of (alpha, gamma) cells where the forward guarantee beats the reverse one.
struct RegionMap {
  int resolution = 0;
  double f_star = 0.0;
  std::vector<double> alphas;  // linspace(0, 0.99, resolution)
  std::vector<double> gammas;  // linspace(0.01, 1, resolution)
  std::vector<std::uint8_t> forward_better;  // [gamma index * resolution + alpha index]

  bool at(int alpha_index, int gamma_index) const {
    return forward_better[static_cast<std::size_t>(gamma_index * resolution + alpha_index)] != 0;
  }
  std::size_t count() const;
};

inline constexpr double kRegionTolerance = 1e-12;

/// A cell is set when g_fg > g_rg + kRegionTolerance.
RegionMap region_map(double f_star, int resolution);

struct MonotonicityViolation {
  int k;
  double before;
  double after;
};

/// Iterations where the group objective failed to move strictly: forward
/// chains must decrease, reverse chains must increase.
std::vector<MonotonicityViolation> strict_decrease_violations(const GreedyTrace& trace);

std::string to_string(RatioKind kind);

}  // namespace safeplan

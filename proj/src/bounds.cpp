#include "safeplan/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "safeplan/error.hpp"
#include "safeplan/parallel.hpp"

namespace safeplan {

std::string to_string(RatioKind kind) {
  return kind == RatioKind::Exact ? "exact" : "greedy-approximate";
}

double exact_ratio_work(int ground_size) {
  return std::pow(3.0, ground_size) * ground_size;
}

namespace {

constexpr double kNoRatio = std::numeric_limits<double>::quiet_NaN();

/// Running extremes of the raw ratios; merged in enumeration order so the
/// witnesses do not depend on the thread count.
struct Accumulator {
  double alpha_raw = kNoRatio;
  double gamma_raw = kNoRatio;
  Triple alpha_witness;
  Triple gamma_witness;
  std::size_t triples = 0;
  std::size_t alpha_skipped = 0;
  std::size_t gamma_skipped = 0;
  std::size_t nonmonotone = 0;

  void add(double d_a, double d_b, const Triple& t) {
    ++triples;
    if (d_a > 0.0 || d_b > 0.0) ++nonmonotone;
    if (d_b < 0.0) {
      const double raw = 1.0 - d_a / d_b;
      if (std::isnan(alpha_raw) || raw > alpha_raw) {
        alpha_raw = raw;
        alpha_witness = t;
      }
    } else if (d_b == 0.0) {
      ++alpha_skipped;
    }
    if (d_a < 0.0) {
      const double raw = d_b / d_a;
      if (std::isnan(gamma_raw) || raw < gamma_raw) {
        gamma_raw = raw;
        gamma_witness = t;
      }
    } else if (d_a == 0.0) {
      ++gamma_skipped;
    }
  }

  void merge(const Accumulator& o) {
    if (!std::isnan(o.alpha_raw) && (std::isnan(alpha_raw) || o.alpha_raw > alpha_raw)) {
      alpha_raw = o.alpha_raw;
      alpha_witness = o.alpha_witness;
    }
    if (!std::isnan(o.gamma_raw) && (std::isnan(gamma_raw) || o.gamma_raw < gamma_raw)) {
      gamma_raw = o.gamma_raw;
      gamma_witness = o.gamma_witness;
    }
    triples += o.triples;
    alpha_skipped += o.alpha_skipped;
    gamma_skipped += o.gamma_skipped;
    nonmonotone += o.nonmonotone;
  }

  RatioReport report(RatioKind kind) const {
    RatioReport r;
    r.kind = kind;
    r.triples = triples;
    r.alpha_skipped = alpha_skipped;
    r.gamma_skipped = gamma_skipped;
    r.nonmonotone = nonmonotone;
    if (!std::isnan(alpha_raw)) {
      r.alpha = std::clamp(alpha_raw, 0.0, 1.0) + 0.0;  // no negative zero
      r.alpha_witness = alpha_witness;
      if (r.alpha != alpha_raw) ++r.clamped;
    }
    if (!std::isnan(gamma_raw)) {
      r.gamma = std::clamp(gamma_raw, 0.0, 1.0) + 0.0;
      r.gamma_witness = gamma_witness;
      if (r.gamma != gamma_raw) ++r.clamped;
    }
    if (nonmonotone > 0) {
      r.notes.push_back(std::to_string(nonmonotone) + " triples have a positive marginal");
    }
    return r;
  }
};

/// True when no task is given to two robots.
bool ground_feasible(GroundSet a, int tasks, int robots) {
  TaskMask seen = 0;
  for (int r = 0; r < robots; ++r) {
    const TaskMask m = static_cast<TaskMask>((a >> (r * tasks)) & ((GroundSet{1} << tasks) - 1u));
    if ((m & seen) != 0) return false;
    seen |= m;
  }
  return true;
}

}  // namespace

RatioReport exact_ratios_from_table(std::span<const double> table, int w, int tasks,
                                    bool feasible_only, double cap, int threads) {
  if (w < 0 || w > 30) throw CapExceeded("exact ratios support at most 30 ground pairs");
  if (table.size() != (std::size_t{1} << w)) {
    throw ValidationError("ratio table must hold 2^|W| values");
  }
  if (exact_ratio_work(w) > cap) {
    throw CapExceeded("exact ratios need " + std::to_string(exact_ratio_work(w)) +
                      " triple evaluations, cap is " + std::to_string(cap));
  }
  if (feasible_only && (tasks < 1 || w % tasks != 0)) {
    throw ValidationError("feasible-only ratios need |W| to be a multiple of |T|");
  }
  const int robots = tasks > 0 ? w / tasks : 0;
  const std::size_t subsets = table.size();
  std::vector<std::uint8_t> feasible;
  if (feasible_only) {
    feasible.resize(subsets);
    for (std::size_t a = 0; a < subsets; ++a) feasible[a] = ground_feasible(a, tasks, robots);
  }

  const std::size_t workers = worker_count(subsets, threads);
  std::vector<Accumulator> parts(workers);
  parallel_blocks(subsets, threads, [&](std::size_t begin, std::size_t end, std::size_t worker) {
    Accumulator& acc = parts[worker];
    for (GroundSet b = begin; b < end; ++b) {
      for (int e = 0; e < w; ++e) {
        const GroundSet bit = GroundSet{1} << e;
        if (b & bit) continue;
        if (feasible_only && !feasible[b | bit]) continue;
        const double d_b = table[b | bit] - table[b];
        // Submasks of b in decreasing order, ending with the empty set.
        for (GroundSet a = b;; a = (a - 1) & b) {
          acc.add(table[a | bit] - table[a], d_b, Triple{a, b, e});
          if (a == 0) break;
        }
      }
    }
  });
  Accumulator total;
  for (const Accumulator& p : parts) total.merge(p);
  RatioReport r = total.report(RatioKind::Exact);
  r.feasible_only = feasible_only;
  return r;
}

std::vector<double> ground_table(ObjectiveCache& cache, int threads) {
  const int tasks = cache.tasks();
  const int robots = cache.robots();
  const int w = tasks * robots;
  if (w > 30) throw CapExceeded("ground table supports at most 30 ground pairs");
  prefetch_all(cache, threads);
  std::vector<double> table(std::size_t{1} << w);
  for (std::size_t a = 0; a < table.size(); ++a) table[a] = ground_extension(a, cache);
  return table;
}

RatioReport exact_ratios(ObjectiveCache& cache, bool feasible_only, double cap, int threads) {
  const int w = cache.tasks() * cache.robots();
  if (exact_ratio_work(w) > cap) {
    throw CapExceeded("exact ratios need " + std::to_string(exact_ratio_work(w)) +
                      " triple evaluations, cap is " + std::to_string(cap));
  }
  const std::vector<double> table = ground_table(cache, threads);
  return exact_ratios_from_table(table, w, cache.tasks(), feasible_only, cap, threads);
}

RatioReport greedy_ratios(std::span<const GreedyTrace> traces, int robots, int tasks,
                          bool feasible_only) {
  const int w = robots * tasks;
  if (w > 63) throw CapExceeded("greedy ratios support at most 63 ground pairs");
  std::unordered_map<std::uint64_t, double> observed;
  std::vector<GroundSet> states;
  for (const GreedyTrace& trace : traces) {
    for (const Evaluation& e : trace.evaluations) {
      observed.emplace((static_cast<std::uint64_t>(e.robot) << 32u) | e.tasks, e.value);
    }
    if (!trace.initial_sets.empty()) {
      states.push_back(to_ground_set(Allocation{trace.initial_sets}, tasks));
    }
    for (const GreedyIteration& it : trace.iterations) {
      states.push_back(to_ground_set(Allocation{it.sets_after}, tasks));
    }
  }
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());

  auto value = [&](GroundSet a) -> std::optional<double> {
    double product = 1.0;
    const std::vector<TaskMask> masks = robot_masks(a, robots, tasks);
    for (int r = 0; r < robots; ++r) {
      auto it = observed.find((static_cast<std::uint64_t>(r) << 32u) | masks[static_cast<std::size_t>(r)]);
      if (it == observed.end()) return std::nullopt;
      product *= it->second;
    }
    return product;
  };

  Accumulator acc;
  for (GroundSet q : states) {
    const std::optional<double> fq = value(q);
    if (!fq) continue;
    for (GroundSet p : states) {
      if (p == q || (p & ~q) != 0) continue;
      const std::optional<double> fp = value(p);
      if (!fp) continue;
      for (int e = 0; e < w; ++e) {
        const GroundSet bit = GroundSet{1} << e;
        if (q & bit) continue;
        if (feasible_only && !ground_feasible(q | bit, tasks, robots)) continue;
        const std::optional<double> fqe = value(q | bit);
        const std::optional<double> fpe = value(p | bit);
        if (!fqe || !fpe) continue;
        acc.add(*fpe - *fp, *fqe - *fq, Triple{p, q, e});
      }
    }
  }
  RatioReport r = acc.report(RatioKind::GreedyApproximate);
  r.feasible_only = feasible_only;
  if (acc.triples == 0) {
    r.insufficient = true;
    r.notes.push_back("insufficient observations: no nested chain states with recorded marginals");
  }
  return r;
}

// -------------------------------------------------------------- guarantees

double forward_guarantee(double alpha, double gamma, double f_star) {
  const double c = gamma * (1.0 - alpha);
  return f_star / c + (c - 1.0) / c;
}

double reverse_guarantee(double alpha, double gamma, double f_star) {
  return f_star * gamma / (1.0 + gamma * alpha);
}

GuaranteeReport evaluate_guarantees(double f_empty, double f_full, double f_star, double f_fg,
                                    double f_rg, double alpha, double gamma) {
  if (!(alpha >= 0.0 && alpha <= 1.0) || !(gamma >= 0.0 && gamma <= 1.0)) {
    throw ValidationError("curvature and submodularity ratio must lie in [0, 1]");
  }
  GuaranteeReport g;
  g.f_empty = f_empty;
  g.f_full = f_full;
  g.f_star = f_star;
  g.f_fg = f_fg;
  g.f_rg = f_rg;
  g.alpha = alpha;
  g.gamma = gamma;

  const double c = gamma * (1.0 - alpha);
  if (alpha >= 1.0) {
    g.vacuous = true;
    g.vacuous_reason = "curvature is 1";
  } else if (gamma <= 0.0) {
    g.vacuous = true;
    g.vacuous_reason = "submodularity ratio is 0";
  } else {
    g.g_fg = forward_guarantee(alpha, gamma, f_star);
    g.g_rg = reverse_guarantee(alpha, gamma, f_star);
    g.bound_fg = f_empty + (f_star - f_empty) / c;
    g.bound_rg = f_full + gamma * (f_star - f_full) / (1.0 + gamma * alpha);
  }

  // (F_fg - F_empty) / (F* - F_empty) <= 1 / c with a nonpositive denominator
  // under monotonicity; the direction flips if it turns out positive.
  const double d1 = f_star - f_empty;
  g.fg_inequality_lhs = c * (f_fg - f_empty);
  g.fg_inequality_rhs = d1;
  g.fg_inequality_holds = d1 > 0.0 ? g.fg_inequality_lhs <= g.fg_inequality_rhs + kGuaranteeSlack
                              : g.fg_inequality_lhs >= g.fg_inequality_rhs - kGuaranteeSlack;

  const double d2 = f_star - f_full;
  g.rg_inequality_lhs = gamma * d2;
  g.rg_inequality_rhs = (1.0 + gamma * alpha) * (f_rg - f_full);
  g.rg_inequality_holds = d2 < 0.0 ? g.rg_inequality_lhs >= g.rg_inequality_rhs - kGuaranteeSlack
                              : g.rg_inequality_lhs <= g.rg_inequality_rhs + kGuaranteeSlack;

  g.fg_below_optimum = f_fg <= f_star + kGuaranteeSlack;
  g.rg_below_optimum = f_rg <= f_star + kGuaranteeSlack;
  return g;
}

GuaranteeReport strict_guarantees(double f_empty, double f_full, double f_star, double f_fg,
                               double f_rg, double alpha, double gamma) {
  GuaranteeReport g = evaluate_guarantees(f_empty, f_full, f_star, f_fg, f_rg, alpha, gamma);
  if (g.vacuous) throw VacuousBound("guarantees are vacuous: " + g.vacuous_reason);
  return g;
}

std::size_t RegionMap::count() const {
  return static_cast<std::size_t>(std::count(forward_better.begin(), forward_better.end(), 1));
}

RegionMap region_map(double f_star, int resolution) {
  if (resolution < 2) throw ValidationError("region map resolution must be at least 2");
  if (!(f_star >= 0.0 && f_star <= 1.0)) throw ValidationError("F* must lie in [0, 1]");
  RegionMap m;
  m.resolution = resolution;
  m.f_star = f_star;
  const double step = 1.0 / (resolution - 1);
  for (int i = 0; i < resolution; ++i) {
    m.alphas.push_back(0.99 * i * step);
    m.gammas.push_back(0.01 + 0.99 * i * step);
  }
  m.alphas.back() = 0.99;
  m.gammas.back() = 1.0;
  m.forward_better.resize(static_cast<std::size_t>(resolution) * resolution);
  for (int gi = 0; gi < resolution; ++gi) {
    for (int ai = 0; ai < resolution; ++ai) {
      const double a = m.alphas[static_cast<std::size_t>(ai)];
      const double g = m.gammas[static_cast<std::size_t>(gi)];
      m.forward_better[static_cast<std::size_t>(gi * resolution + ai)] =
          forward_guarantee(a, g, f_star) > reverse_guarantee(a, g, f_star) + kRegionTolerance;
    }
  }
  return m;
}

std::vector<MonotonicityViolation> strict_decrease_violations(const GreedyTrace& trace) {
  std::vector<MonotonicityViolation> out;
  for (const GreedyIteration& it : trace.iterations) {
    const bool strict = trace.kind == GreedyKind::Forward ? it.objective_after < it.objective_before
                                                          : it.objective_after > it.objective_before;
    if (!strict) out.push_back({it.k, it.objective_before, it.objective_after});
  }
  return out;
}

}  // namespace safeplan

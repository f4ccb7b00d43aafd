#include "safeplan/alloc.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_set>

#include "safeplan/error.hpp"
#include "safeplan/parallel.hpp"

namespace safeplan {

bool Allocation::is_partition(int tasks) const {
  const TaskMask all = tasks == 0 ? 0u : (TaskMask{1} << tasks) - 1u;
  TaskMask seen = 0;
  for (TaskMask s : sets) {
    if ((s & seen) != 0 || (s & ~all) != 0) return false;
    seen |= s;
  }
  return seen == all;
}

std::vector<int> Allocation::owners(int tasks) const {
  std::vector<int> out(static_cast<std::size_t>(tasks), -1);
  for (std::size_t r = 0; r < sets.size(); ++r) {
    for (int t = 0; t < tasks; ++t) {
      if ((sets[r] >> t) & 1u) out[static_cast<std::size_t>(t)] = static_cast<int>(r);
    }
  }
  return out;
}

std::vector<TaskMask> robot_masks(GroundSet a, int robots, int tasks) {
  std::vector<TaskMask> masks(static_cast<std::size_t>(robots), 0);
  for (int r = 0; r < robots; ++r) {
    for (int t = 0; t < tasks; ++t) {
      if ((a >> ground_index({t, r}, tasks)) & 1u) masks[static_cast<std::size_t>(r)] |= TaskMask{1} << t;
    }
  }
  return masks;
}

GroundSet to_ground_set(const Allocation& alloc, int tasks) {
  GroundSet a = 0;
  for (std::size_t r = 0; r < alloc.sets.size(); ++r) {
    for (int t = 0; t < tasks; ++t) {
      if ((alloc.sets[r] >> t) & 1u) a |= GroundSet{1} << ground_index({t, static_cast<int>(r)}, tasks);
    }
  }
  return a;
}

double group_success(const Allocation& alloc, ObjectiveCache& cache) {
  if (alloc.sets.size() != static_cast<std::size_t>(cache.robots())) {
    throw ValidationError("allocation has " + std::to_string(alloc.sets.size()) +
                          " robots, objective has " + std::to_string(cache.robots()));
  }
  double product = 1.0;
  for (std::size_t r = 0; r < alloc.sets.size(); ++r) {
    product *= cache.value(static_cast<int>(r), alloc.sets[r]);
  }
  return product;
}

double ground_extension(GroundSet a, ObjectiveCache& cache) {
  const int w = cache.robots() * cache.tasks();
  if (w < 64 && (a >> w) != 0) throw ValidationError("ground set has pairs outside T x R");
  return group_success(Allocation{robot_masks(a, cache.robots(), cache.tasks())}, cache);
}

// ----------------------------------------------------------------- auction

namespace {

struct Rank {
  int zeros;
  double score;
};

Rank rank_bid(const Bid& bid, std::span<const double> f, std::span<const std::uint8_t> in_product) {
  int zeros = 0;
  double others = 1.0;
  double nonzero = 1.0;
  for (std::size_t r = 0; r < f.size(); ++r) {
    if (!in_product[r]) continue;
    const bool own = static_cast<int>(r) == bid.robot;
    const double v = own ? bid.value : f[r];
    if (v == 0.0) {
      ++zeros;
    } else {
      nonzero *= v;
    }
    if (!own) others *= f[r];
  }
  return {zeros, zeros == 0 ? bid.delta * others : nonzero};
}

}  // namespace

std::size_t auction_round(std::span<const Bid> bids, std::span<const double> f,
                          std::span<const std::uint8_t> in_product) {
  if (bids.empty()) throw ValidationError("auction round without bids");
  if (f.size() != in_product.size()) throw ValidationError("auction round: size mismatch");
  std::size_t best = 0;
  Rank best_rank = rank_bid(bids[0], f, in_product);
  for (std::size_t i = 1; i < bids.size(); ++i) {
    const Rank r = rank_bid(bids[i], f, in_product);
    bool better = false;
    if (r.zeros != best_rank.zeros) {
      better = r.zeros < best_rank.zeros;
    } else if (r.score != best_rank.score) {
      better = r.score > best_rank.score;
    } else if (bids[i].task != bids[best].task) {
      better = bids[i].task < bids[best].task;
    } else {
      better = bids[i].robot < bids[best].robot;
    }
    if (better) {
      best = i;
      best_rank = r;
    }
  }
  return best;
}

double product_after(const Bid& bid, std::span<const double> f,
                     std::span<const std::uint8_t> in_product) {
  double product = 1.0;
  for (std::size_t r = 0; r < f.size(); ++r) {
    if (!in_product[r]) continue;
    product *= static_cast<int>(r) == bid.robot ? bid.value : f[r];
  }
  return product;
}

// ----------------------------------------------------------------- greedies

namespace {

/// Cache access that remembers the first request of each (robot, mask).
class Recorder {
 public:
  Recorder(ObjectiveCache& cache, std::vector<Evaluation>& log) : cache_(cache), log_(log) {}

  double operator()(int robot, TaskMask tasks) {
    const double v = cache_.value(robot, tasks);
    if (seen_.insert((static_cast<std::uint64_t>(robot) << 32u) | tasks).second) {
      log_.push_back({robot, tasks, v});
    }
    return v;
  }

  /// Appends evaluations gathered off-thread, in the order given.
  void merge(std::span<const Evaluation> evals) {
    for (const Evaluation& e : evals) {
      if (seen_.insert((static_cast<std::uint64_t>(e.robot) << 32u) | e.tasks).second) {
        log_.push_back(e);
      }
    }
  }

 private:
  ObjectiveCache& cache_;
  std::vector<Evaluation>& log_;
  std::unordered_set<std::uint64_t> seen_;
};

double objective(std::span<const double> f, std::span<const std::uint8_t> in_product) {
  double product = 1.0;
  for (std::size_t r = 0; r < f.size(); ++r) {
    if (in_product[r]) product *= f[r];
  }
  return product;
}

/// Fresh bids for the robots in `recompute`. `candidates(r)` gives the tasks a
/// robot may bid on and `next(r, t)` the set it would hold afterwards.
template <typename Candidates, typename Next>
void compute_bids(ObjectiveCache& cache, Recorder& recorder, const std::vector<int>& recompute,
                  const std::vector<TaskMask>& sets, std::vector<std::optional<Bid>>& current,
                  int threads, Candidates candidates, Next next) {
  std::vector<std::vector<Evaluation>> logs(recompute.size());
  parallel_blocks(recompute.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const int r = recompute[i];
      auto& log = logs[i];
      auto eval = [&](TaskMask m) {
        const double v = cache.value(r, m);
        log.push_back({r, m, v});
        return v;
      };
      const TaskMask held = sets[static_cast<std::size_t>(r)];
      const TaskMask open = candidates(r);
      std::optional<Bid> best;
      if (open != 0) {
        const double base = eval(held);
        for (int t = 0; t < cache.tasks(); ++t) {
          if (!((open >> t) & 1u)) continue;
          const double v = eval(next(held, t));
          const double delta = v - base;
          if (!best || delta > best->delta) best = Bid{r, t, delta, v, true};
        }
      }
      current[static_cast<std::size_t>(r)] = best;
    }
  });
  for (const auto& log : logs) recorder.merge(log);
}

std::vector<Bid> bids_in_play(std::vector<std::optional<Bid>>& current,
                              const std::vector<int>& recompute) {
  std::vector<Bid> bids;
  for (std::size_t r = 0; r < current.size(); ++r) {
    if (!current[r]) continue;
    Bid b = *current[r];
    b.fresh = std::find(recompute.begin(), recompute.end(), static_cast<int>(r)) != recompute.end();
    bids.push_back(b);
  }
  return bids;
}

void finish(GreedyResult& res, ObjectiveCache& cache, const std::vector<TaskMask>& sets) {
  res.allocation.sets = sets;
  res.value = group_success(res.allocation, cache);
  res.distinct_evaluations = res.trace.evaluations.size();
  res.notes = res.trace.notes;
}

}  // namespace

GreedyResult forward_greedy(ObjectiveCache& cache, int threads) {
  const int robots = cache.robots();
  const int tasks = cache.tasks();
  GreedyResult res;
  GreedyTrace& trace = res.trace;
  trace.kind = GreedyKind::Forward;
  Recorder recorder(cache, trace.evaluations);

  std::vector<TaskMask> sets(static_cast<std::size_t>(robots), 0);
  std::vector<double> f(static_cast<std::size_t>(robots));
  for (int r = 0; r < robots; ++r) f[static_cast<std::size_t>(r)] = recorder(r, 0);
  trace.initial_sets = sets;
  trace.initial_f = f;
  trace.in_product.assign(static_cast<std::size_t>(robots), 1);

  if (tasks == 0) {
    trace.degenerate = true;
    trace.notes.push_back("no targets: the allocation is empty");
    finish(res, cache, sets);
    return res;
  }

  bool any_positive = false;
  for (double v : f) any_positive = any_positive || v > 0.0;
  if (any_positive) {
    for (int r = 0; r < robots; ++r) {
      if (f[static_cast<std::size_t>(r)] == 0.0) {
        trace.in_product[static_cast<std::size_t>(r)] = 0;
        trace.notes.push_back("robot " + std::to_string(r) +
                              " cannot reach the exit even without tasks; excluded from bidding");
      }
    }
  } else {
    trace.notes.push_back("no robot can reach the exit; every allocation has F = 0");
  }

  std::vector<int> recompute;
  for (int r = 0; r < robots; ++r) {
    if (trace.in_product[static_cast<std::size_t>(r)]) recompute.push_back(r);
  }
  std::vector<std::optional<Bid>> current(static_cast<std::size_t>(robots));
  TaskMask open = cache.all_tasks();

  for (int k = 1; k <= tasks; ++k) {
    GreedyIteration it;
    it.k = k;
    it.recompute = recompute;
    it.open_before = open;
    compute_bids(
        cache, recorder, recompute, sets, current, threads, [&](int) { return open; },
        [](TaskMask held, int t) { return held | (TaskMask{1} << t); });
    it.bids = bids_in_play(current, recompute);
    const Bid& win = it.bids[auction_round(it.bids, f, trace.in_product)];
    it.winner = win.robot;
    it.task = win.task;
    it.objective_before = objective(f, trace.in_product);

    const TaskMask bit = TaskMask{1} << win.task;
    sets[static_cast<std::size_t>(win.robot)] |= bit;
    f[static_cast<std::size_t>(win.robot)] += win.delta;
    open &= ~bit;
    recompute.clear();
    for (int r = 0; r < robots; ++r) {
      const auto& b = current[static_cast<std::size_t>(r)];
      if (b && b->task == win.task) recompute.push_back(r);
    }
    it.objective_after = objective(f, trace.in_product);
    it.sets_after = sets;
    it.f_after = f;
    it.open_after = open;
    trace.iterations.push_back(std::move(it));
  }
  finish(res, cache, sets);
  return res;
}

GreedyResult reverse_greedy(ObjectiveCache& cache, int threads) {
  const int robots = cache.robots();
  const int tasks = cache.tasks();
  GreedyResult res;
  GreedyTrace& trace = res.trace;
  trace.kind = GreedyKind::Reverse;
  Recorder recorder(cache, trace.evaluations);

  const TaskMask all = cache.all_tasks();
  std::vector<TaskMask> sets(static_cast<std::size_t>(robots), all);
  std::vector<double> f(static_cast<std::size_t>(robots));
  for (int r = 0; r < robots; ++r) f[static_cast<std::size_t>(r)] = recorder(r, all);
  trace.initial_sets = sets;
  trace.initial_f = f;
  trace.in_product.assign(static_cast<std::size_t>(robots), 1);

  if (tasks == 0) {
    trace.degenerate = true;
    trace.notes.push_back("no targets: the allocation is empty");
    finish(res, cache, sets);
    return res;
  }
  if (robots == 1) {
    trace.notes.push_back("single robot: it keeps every task");
    finish(res, cache, sets);
    return res;
  }

  std::vector<int> recompute;
  for (int r = 0; r < robots; ++r) recompute.push_back(r);
  std::vector<std::optional<Bid>> current(static_cast<std::size_t>(robots));
  TaskMask open = all;

  const int iterations = tasks * (robots - 1);
  for (int k = 1; k <= iterations; ++k) {
    GreedyIteration it;
    it.k = k;
    it.recompute = recompute;
    it.open_before = open;
    compute_bids(
        cache, recorder, recompute, sets, current, threads,
        [&](int r) { return open & sets[static_cast<std::size_t>(r)]; },
        [](TaskMask held, int t) { return held & ~(TaskMask{1} << t); });
    it.bids = bids_in_play(current, recompute);
    if (it.bids.empty()) throw NumericViolation("reverse greedy ran out of bids");
    const Bid& win = it.bids[auction_round(it.bids, f, trace.in_product)];
    it.winner = win.robot;
    it.task = win.task;
    it.objective_before = objective(f, trace.in_product);

    const TaskMask bit = TaskMask{1} << win.task;
    sets[static_cast<std::size_t>(win.robot)] &= ~bit;
    f[static_cast<std::size_t>(win.robot)] += win.delta;
    int holders = 0;
    for (TaskMask s : sets) holders += (s & bit) != 0;
    recompute.clear();
    if (holders == 1) {
      open &= ~bit;
      it.closed = true;
      for (int r = 0; r < robots; ++r) {
        const auto& b = current[static_cast<std::size_t>(r)];
        if (b && b->task == win.task) recompute.push_back(r);
      }
    } else {
      recompute.push_back(win.robot);
    }
    it.objective_after = objective(f, trace.in_product);
    it.sets_after = sets;
    it.f_after = f;
    it.open_after = open;
    trace.iterations.push_back(std::move(it));
  }
  finish(res, cache, sets);
  return res;
}

// ------------------------------------------------------------- brute force

void prefetch_all(ObjectiveCache& cache, int threads) {
  const std::size_t masks = std::size_t{1} << cache.tasks();
  const std::size_t total = masks * static_cast<std::size_t>(cache.robots());
  parallel_blocks(total, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      (void)cache.value(static_cast<int>(i / masks), static_cast<TaskMask>(i % masks));
    }
  });
}

BruteForceResult brute_force_optimal(ObjectiveCache& cache, double cap, int threads) {
  const int robots = cache.robots();
  const int tasks = cache.tasks();
  const double count = std::pow(static_cast<double>(robots), tasks);
  if (count > cap) {
    throw CapExceeded("brute force needs " + std::to_string(count) +
                      " assignments, cap is " + std::to_string(cap));
  }
  prefetch_all(cache, threads);
  const std::size_t masks = std::size_t{1} << tasks;
  std::vector<double> table(masks * static_cast<std::size_t>(robots));
  for (int r = 0; r < robots; ++r) {
    for (std::size_t m = 0; m < masks; ++m) {
      table[static_cast<std::size_t>(r) * masks + m] = cache.value(r, static_cast<TaskMask>(m));
    }
  }

  BruteForceResult res;
  std::vector<int> owner(static_cast<std::size_t>(tasks), 0);
  std::vector<TaskMask> sets(static_cast<std::size_t>(robots));
  double best = -1.0;
  while (true) {
    std::fill(sets.begin(), sets.end(), 0u);
    for (int t = 0; t < tasks; ++t) sets[static_cast<std::size_t>(owner[static_cast<std::size_t>(t)])] |= TaskMask{1} << t;
    double product = 1.0;
    for (int r = 0; r < robots; ++r) {
      product *= table[static_cast<std::size_t>(r) * masks + sets[static_cast<std::size_t>(r)]];
    }
    ++res.candidates;
    if (product > best) {
      best = product;
      res.allocation.sets = sets;
    }
    // Odometer over owner vectors with the last task varying fastest.
    int t = tasks - 1;
    while (t >= 0 && owner[static_cast<std::size_t>(t)] == robots - 1) {
      owner[static_cast<std::size_t>(t)] = 0;
      --t;
    }
    if (t < 0) break;
    ++owner[static_cast<std::size_t>(t)];
  }
  res.value = best;
  res.distinct_evaluations = table.size();
  if (tasks == 0) res.notes.push_back("no targets: the allocation is empty");
  return res;
}

}  // namespace safeplan

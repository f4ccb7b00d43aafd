#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>
#include <tuple>

namespace oracle {

std::vector<double> nearest_source_theta(const Grid& g, const std::vector<Source>& sources,
                                         double fallback) {
  const int n = g.size();
  std::vector<int> dist(n, -1);
  std::vector<double> theta(n, fallback);
  // One BFS per source; keep the closest source, the earlier one on ties.
  std::vector<int> best(n, -1);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    std::vector<int> d(n, -1);
    std::deque<int> q{g.id(sources[s].cell)};
    d[g.id(sources[s].cell)] = 0;
    while (!q.empty()) {
      const Pt p = g.pt(q.front());
      q.pop_front();
      for (int m = 1; m < 5; ++m) {
        const Pt nb{p.c + kDc[m], p.r + kDr[m]};
        if (!g.free(nb) || d[g.id(nb)] >= 0) continue;
        d[g.id(nb)] = d[g.id(p)] + 1;
        q.push_back(g.id(nb));
      }
    }
    for (int i = 0; i < n; ++i) {
      if (d[i] < 0) continue;
      if (best[i] < 0 || d[i] < dist[i]) {
        best[i] = static_cast<int>(s);
        dist[i] = d[i];
        theta[i] = sources[s].theta;
      }
    }
  }
  return theta;
}

namespace {

// P(cell i is contaminated next step | contaminated set y), with y a bitmask
// over linear ids.
double ignite(const Grid& g, const std::vector<double>& theta, std::uint32_t y, int i) {
  if ((y >> i) & 1u) return 1.0;
  const Pt p = g.pt(i);
  double stay_clear = 1.0;
  for (int dc = -1; dc <= 1; ++dc) {
    for (int dr = -1; dr <= 1; ++dr) {
      if (dc == 0 && dr == 0) continue;
      const Pt nb{p.c + dc, p.r + dr};
      if (!g.free(nb) || !((y >> g.id(nb)) & 1u)) continue;
      const double t = theta[g.id(nb)];
      stay_clear *= (dc != 0 && dr != 0) ? 1.0 - t / std::sqrt(2.0) : 1.0 - t;
    }
  }
  return 1.0 - stay_clear;
}

}  // namespace

Field exact_field(const Grid& g, const std::vector<Source>& sources, double fallback, int horizon) {
  if (g.size() > 24) throw std::invalid_argument("oracle field: grid too large");
  const int n = g.size();
  const std::vector<double> theta = nearest_source_theta(g, sources, fallback);
  Field f;
  f.horizon = horizon;
  f.cells = n;
  f.p.assign(static_cast<std::size_t>(horizon) * n * 5, 0.0);
  f.flagged.assign(static_cast<std::size_t>(horizon) * n, 0);

  std::uint32_t y0 = 0;
  for (const Source& s : sources) y0 |= 1u << g.id(s.cell);
  std::map<std::uint32_t, double> dist{{y0, 1.0}};

  for (int k = 0; k < horizon; ++k) {
    std::vector<double> clear(n, 0.0);
    std::vector<double> joint(static_cast<std::size_t>(n) * 5, 0.0);
    std::map<std::uint32_t, double> next;
    for (const auto& [y, mass] : dist) {
      std::vector<double> pc(n);
      for (int i = 0; i < n; ++i) pc[i] = g.free(g.pt(i)) ? ignite(g, theta, y, i) : 0.0;
      for (int x = 0; x < n; ++x) {
        if (!g.free(g.pt(x)) || ((y >> x) & 1u)) continue;
        clear[x] += mass;
        for (int d = 0; d < 5; ++d) {
          const Pt to{g.pt(x).c + kDc[d], g.pt(x).r + kDr[d]};
          if (!g.free(to)) continue;
          joint[static_cast<std::size_t>(x) * 5 + d] += mass * pc[g.id(to)];
        }
      }
      // Enumerate every successor set explicitly.
      std::vector<int> open;
      for (int i = 0; i < n; ++i) {
        if (g.free(g.pt(i)) && !((y >> i) & 1u) && pc[i] > 0.0) open.push_back(i);
      }
      const std::uint32_t subsets = 1u << open.size();
      for (std::uint32_t s = 0; s < subsets; ++s) {
        double p = mass;
        std::uint32_t yn = y;
        for (std::size_t j = 0; j < open.size(); ++j) {
          if ((s >> j) & 1u) {
            p *= pc[open[j]];
            yn |= 1u << open[j];
          } else {
            p *= 1.0 - pc[open[j]];
          }
        }
        if (p > 0.0) next[yn] += p;
      }
    }
    for (int x = 0; x < n; ++x) {
      if (!g.free(g.pt(x))) continue;
      const bool flag = clear[x] == 0.0;
      f.flagged[static_cast<std::size_t>(k) * n + x] = flag ? 1 : 0;
      for (int d = 0; d < 5; ++d) {
        const Pt to{g.pt(x).c + kDc[d], g.pt(x).r + kDr[d]};
        if (!g.free(to)) continue;
        const double v = flag ? 1.0 : joint[static_cast<std::size_t>(x) * 5 + d] / clear[x];
        f.p[(static_cast<std::size_t>(k) * n + x) * 5 + d] = std::min(1.0, v);
      }
    }
    dist = std::move(next);
  }
  f.final_marginal.assign(n, 0.0);
  for (const auto& [y, mass] : dist) {
    for (int i = 0; i < n; ++i) {
      if ((y >> i) & 1u) f.final_marginal[i] += mass;
    }
  }
  return f;
}

namespace {

struct SequenceSearch {
  const Grid& g;
  const std::vector<Pt>& targets;
  Pt goal;
  int horizon;
  const Field& field;
  std::uint32_t full;

  std::uint32_t mark(std::uint32_t q, Pt x) const {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i] == x) q |= 1u << i;
    }
    return q;
  }

  double best(int k, Pt x, std::uint32_t q, double survival) const {
    if (q == full && x == goal) return survival;
    if (k == horizon || survival == 0.0) return 0.0;
    double out = 0.0;
    for (int d = 0; d < 5; ++d) {
      const Pt to{x.c + kDc[d], x.r + kDr[d]};
      if (!g.free(to)) continue;
      const double s = survival * (1.0 - field.at(k, g.id(x), d));
      out = std::max(out, best(k + 1, to, mark(q, to), s));
    }
    return out;
  }
};

}  // namespace

double sequence_value(const Grid& g, Pt start, const std::vector<Pt>& targets, Pt goal, int horizon,
                      const Field& field) {
  if (field.horizon > 0 && field.flag(0, g.id(start))) return 0.0;
  SequenceSearch s{g, targets, goal, horizon, field, static_cast<std::uint32_t>((1u << targets.size()) - 1u)};
  return s.best(0, start, s.mark(0, start), 1.0);
}

int shortest_visiting_walk(const Grid& g, Pt start, const std::vector<Pt>& targets, Pt goal) {
  const std::uint32_t full = (1u << targets.size()) - 1u;
  auto mark = [&](std::uint32_t q, Pt x) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i] == x) q |= 1u << i;
    }
    return q;
  };
  std::map<std::pair<int, std::uint32_t>, int> seen;
  std::deque<std::pair<int, std::uint32_t>> queue;
  const auto s0 = std::make_pair(g.id(start), mark(0, start));
  seen[s0] = 0;
  queue.push_back(s0);
  while (!queue.empty()) {
    const auto cur = queue.front();
    queue.pop_front();
    const Pt x = g.pt(cur.first);
    if (cur.second == full && x == goal) return seen[cur];
    for (int d = 1; d < 5; ++d) {
      const Pt to{x.c + kDc[d], x.r + kDr[d]};
      if (!g.free(to)) continue;
      const auto nxt = std::make_pair(g.id(to), mark(cur.second, to));
      if (seen.count(nxt)) continue;
      seen[nxt] = seen[cur] + 1;
      queue.push_back(nxt);
    }
  }
  return -1;
}

Ratios ratios(const std::vector<double>& table, int w) {
  const std::uint32_t n = 1u << w;
  bool have_alpha = false;
  bool have_gamma = false;
  double alpha = 0.0;
  double gamma = 1.0;
  for (std::uint32_t b = 0; b < n; ++b) {
    for (std::uint32_t a = 0; a < n; ++a) {
      if ((a & ~b) != 0) continue;
      for (int e = 0; e < w; ++e) {
        const std::uint32_t bit = 1u << e;
        if (b & bit) continue;
        const double da = table[a | bit] - table[a];
        const double db = table[b | bit] - table[b];
        if (db < 0.0) {
          const double v = 1.0 - da / db;
          alpha = have_alpha ? std::max(alpha, v) : v;
          have_alpha = true;
        }
        if (da < 0.0) {
          const double v = db / da;
          gamma = have_gamma ? std::min(gamma, v) : v;
          have_gamma = true;
        }
      }
    }
  }
  return {std::clamp(alpha, 0.0, 1.0), std::clamp(gamma, 0.0, 1.0)};
}

double best_assignment(const std::vector<std::vector<double>>& value, int robots, int tasks) {
  std::vector<std::uint32_t> sets(robots, 0);
  double best = -1.0;
  auto rec = [&](auto&& self, int t) -> void {
    if (t == tasks) {
      double p = 1.0;
      for (int r = 0; r < robots; ++r) p *= value[r][sets[r]];
      best = std::max(best, p);
      return;
    }
    for (int r = 0; r < robots; ++r) {
      sets[r] |= 1u << t;
      self(self, t + 1);
      sets[r] &= ~(1u << t);
    }
  };
  rec(rec, 0);
  return best;
}

namespace {

double product(const std::vector<std::vector<double>>& value, const std::vector<std::uint32_t>& sets) {
  double p = 1.0;
  for (std::size_t r = 0; r < sets.size(); ++r) p *= value[r][sets[r]];
  return p;
}

}  // namespace

std::vector<std::uint32_t> central_forward(const std::vector<std::vector<double>>& value, int robots,
                                           int tasks) {
  std::vector<std::uint32_t> sets(robots, 0);
  std::uint32_t open = (1u << tasks) - 1u;
  while (open != 0) {
    double best = -1.0;
    int br = -1;
    int bt = -1;
    for (int t = 0; t < tasks; ++t) {
      for (int r = 0; r < robots; ++r) {
        if (!((open >> t) & 1u)) continue;
        sets[r] |= 1u << t;
        const double v = product(value, sets);
        sets[r] &= ~(1u << t);
        if (v > best) {
          best = v;
          br = r;
          bt = t;
        }
      }
    }
    sets[br] |= 1u << bt;
    open &= ~(1u << bt);
  }
  return sets;
}

std::vector<std::uint32_t> central_reverse(const std::vector<std::vector<double>>& value, int robots,
                                           int tasks) {
  const std::uint32_t all = (1u << tasks) - 1u;
  std::vector<std::uint32_t> sets(robots, all);
  auto holders = [&](int t) {
    int h = 0;
    for (int r = 0; r < robots; ++r) h += (sets[r] >> t) & 1u;
    return h;
  };
  while (true) {
    double best = -1.0;
    int br = -1;
    int bt = -1;
    for (int t = 0; t < tasks; ++t) {
      for (int r = 0; r < robots; ++r) {
        if (!((sets[r] >> t) & 1u) || holders(t) < 2) continue;
        sets[r] &= ~(1u << t);
        const double v = product(value, sets);
        sets[r] |= 1u << t;
        if (v > best) {
          best = v;
          br = r;
          bt = t;
        }
      }
    }
    if (br < 0) break;
    sets[br] &= ~(1u << bt);
  }
  return sets;
}

std::vector<double> monotone_table(Rng& rng, int tasks, double floor) {
  const std::uint32_t n = 1u << tasks;
  std::vector<double> f(n, 1.0);
  f[0] = uniform(rng, 0.6, 1.0);
  // Subsets in increasing popcount order are reached after all their subsets
  // when visited in numeric order.
  for (std::uint32_t s = 1; s < n; ++s) {
    double lo = 1.0;
    for (int t = 0; t < tasks; ++t) {
      if ((s >> t) & 1u) lo = std::min(lo, f[s & ~(1u << t)]);
    }
    f[s] = lo * uniform(rng, floor, 1.0);
  }
  return f;
}

Grid random_grid(Rng& rng, int w, int h, int max_blocked) {
  Grid g{w, h, std::vector<char>(static_cast<std::size_t>(w * h), 0)};
  const int blocked = pick(rng, 0, max_blocked);
  for (int i = 0; i < blocked; ++i) g.blocked[pick(rng, 0, w * h - 1)] = 1;
  if (free_ids(g).empty()) g.blocked[0] = 0;
  return g;
}

std::vector<int> free_ids(const Grid& g) {
  std::vector<int> out;
  for (int i = 0; i < g.size(); ++i) {
    if (!g.blocked[i]) out.push_back(i);
  }
  return out;
}

double joint_success(const Grid& g, const std::vector<Source>& sources, double fallback, Pt start,
                     const std::vector<Pt>& targets, Pt goal, int horizon, const PolicyFn& action) {
  const std::vector<double> theta = nearest_source_theta(g, sources, fallback);
  const std::uint32_t full = (1u << targets.size()) - 1u;
  auto mark = [&](std::uint32_t q, int cell) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (g.id(targets[i]) == cell) q |= 1u << i;
    }
    return q;
  };
  std::uint32_t y0 = 0;
  for (const Source& s : sources) y0 |= 1u << g.id(s.cell);
  if ((y0 >> g.id(start)) & 1u) return 0.0;

  // Alive states: (cell, visited, hazard set) -> probability.
  using Key = std::tuple<int, std::uint32_t, std::uint32_t>;
  std::map<Key, double> alive{{Key{g.id(start), mark(0, g.id(start)), y0}, 1.0}};
  double success = 0.0;
  for (int k = 0;; ++k) {
    std::map<Key, double> next;
    for (const auto& [key, mass] : alive) {
      const auto [cell, q, y] = key;
      if (q == full && cell == g.id(goal)) {
        success += mass;
        continue;
      }
      if (k == horizon) continue;
      const int d = action(k, q, cell);
      const Pt x = g.pt(cell);
      const Pt to{x.c + kDc[d], x.r + kDr[d]};
      const int nc = g.id(to);
      const std::uint32_t nq = mark(q, nc);
      std::vector<int> open;
      std::vector<double> pc;
      for (int i = 0; i < g.size(); ++i) {
        if (!g.free(g.pt(i)) || ((y >> i) & 1u)) continue;
        const double p = ignite(g, theta, y, i);
        if (p > 0.0) {
          open.push_back(i);
          pc.push_back(p);
        }
      }
      for (std::uint32_t s = 0; s < (1u << open.size()); ++s) {
        double p = mass;
        std::uint32_t yn = y;
        for (std::size_t j = 0; j < open.size(); ++j) {
          if ((s >> j) & 1u) {
            p *= pc[j];
            yn |= 1u << open[j];
          } else {
            p *= 1.0 - pc[j];
          }
        }
        if (p > 0.0 && !((yn >> nc) & 1u)) next[Key{nc, nq, yn}] += p;
      }
    }
    if (k == horizon || next.empty()) break;
    alive = std::move(next);
  }
  return success;
}

Instance random_instance(Rng& rng, int max_free, int max_targets, int max_sources, int min_horizon,
                         int max_horizon, double max_theta) {
  Instance in;
  for (;;) {
    const int w = pick(rng, 1, 4);
    const int h = pick(rng, 1, 4);
    in.grid = random_grid(rng, w, h, (w * h) / 3);
    if (static_cast<int>(free_ids(in.grid).size()) <= max_free) break;
  }
  std::vector<int> cells = free_ids(in.grid);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::size_t next = 0;
  auto take = [&]() { return in.grid.pt(cells[next++ % cells.size()]); };
  in.goal = take();
  in.start = pick(rng, 0, 3) == 0 ? in.goal : take();
  const int targets = std::min<int>(pick(rng, 0, max_targets), static_cast<int>(cells.size()) - 2);
  for (int i = 0; i < targets; ++i) in.targets.push_back(take());
  const int sources =
      std::min<int>(pick(rng, 0, max_sources), static_cast<int>(cells.size() - std::min(next, cells.size())));
  for (int i = 0; i < sources; ++i) in.sources.push_back({take(), uniform(rng, 0.0, max_theta)});
  in.fallback = uniform(rng, 0.0, max_theta);
  in.horizon = pick(rng, min_horizon, max_horizon);
  return in;
}

}  // namespace oracle

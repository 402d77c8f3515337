#include "tessera/lpsolve.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <set>

namespace tessera {

namespace {

constexpr i64 kInf = std::numeric_limits<i64>::max() / 4;

struct Arc {
  int to;
  i64 cap, cost;
  int rev;  // index of reverse arc in g[to]
};

struct Mcmf {
  std::vector<std::vector<Arc>> g;
  explicit Mcmf(int n) : g(n) {}

  void add(int u, int v, i64 cap, i64 cost) {
    g[u].push_back({v, cap, cost, int(g[v].size())});
    g[v].push_back({u, 0, -cost, int(g[u].size()) - 1});
  }

  /// SPFA-based successive shortest paths; costs may be negative but the
  /// caller guarantees no negative cycle. Returns false if demand unmet.
  bool run(int s, int t, i64 need) {
    int n = int(g.size());
    while (need > 0) {
      std::vector<i64> dist(n, kInf);
      std::vector<int> pv(n, -1), pe(n, -1);
      std::vector<char> inq(n, 0);
      std::deque<int> q{s};
      dist[s] = 0;
      while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        inq[u] = 0;
        for (size_t i = 0; i < g[u].size(); ++i) {
          const Arc& a = g[u][i];
          if (a.cap <= 0 || dist[u] + a.cost >= dist[a.to]) continue;
          dist[a.to] = dist[u] + a.cost;
          pv[a.to] = u;
          pe[a.to] = int(i);
          if (!inq[a.to]) {
            inq[a.to] = 1;
            q.push_back(a.to);
          }
        }
      }
      if (dist[t] >= kInf) return false;
      i64 push = need;
      for (int v = t; v != s; v = pv[v]) push = std::min(push, g[pv[v]][pe[v]].cap);
      for (int v = t; v != s; v = pv[v]) {
        Arc& a = g[pv[v]][pe[v]];
        a.cap -= push;
        g[v][a.rev].cap += push;
      }
      need -= push;
    }
    return true;
  }

  /// Bellman-Ford potentials over residual arcs from a virtual source.
  Vec potentials() const {
    int n = int(g.size());
    Vec p(n, 0);
    for (int iter = 0; iter < n; ++iter) {
      bool changed = false;
      for (int u = 0; u < n; ++u)
        for (const Arc& a : g[u])
          if (a.cap > 0 && p[u] + a.cost < p[a.to]) {
            p[a.to] = p[u] + a.cost;
            changed = true;
          }
      if (!changed) break;
    }
    return p;
  }
};

/// Finds a cycle with positive total min_gap reachable through the
/// constraint arcs (the witness for infeasibility).
std::vector<int> positive_cycle(int n, const std::vector<DiffConstraint>& cs) {
  // Bellman-Ford on arcs u->v with length -min_gap; negative cycle ==
  // positive-gap constraint cycle.
  Vec dist(n, 0);
  std::vector<int> pred(n, -1);
  int flagged = -1;
  for (int iter = 0; iter < n && flagged < 0; ++iter) {
    bool changed = false;
    for (const auto& c : cs) {
      if (dist[c.u] - c.min_gap < dist[c.v]) {
        dist[c.v] = dist[c.u] - c.min_gap;
        pred[c.v] = c.u;
        changed = true;
        if (iter == n - 1) flagged = c.v;
      }
    }
    if (!changed) return {};
  }
  if (flagged < 0) return {};
  for (int i = 0; i < n; ++i) flagged = pred[flagged];
  std::vector<int> cycle;
  for (int v = flagged;; v = pred[v]) {
    cycle.push_back(v);
    if (v == flagged && cycle.size() > 1) break;
  }
  std::reverse(cycle.begin(), cycle.end());
  cycle.pop_back();
  return cycle;
}

}  // namespace

LpResult solve_difference_lp(const DifferenceLP& lp) {
  LpResult res;
  int n = lp.n_vars;

  // expand equalities into opposing constraints
  std::vector<DiffConstraint> cs;
  for (const auto& c : lp.constraints) {
    TESSERA_CHECK(c.u >= 0 && c.u < n && c.v >= 0 && c.v < n, "lp: bad var id");
    TESSERA_CHECK(c.weight >= 0, "lp: negative weight");
    cs.push_back(c);
    if (c.equality) cs.push_back({c.v, c.u, -c.min_gap, 0, false});
  }

  auto cyc = positive_cycle(n, cs);
  if (!cyc.empty()) {
    res.feasible = false;
    res.violating_cycle = cyc;
    return res;
  }

  // dual transshipment: node balance = sum(w in) - sum(w out); arc u->v has
  // cost -min_gap and unlimited capacity.
  Vec balance(n, 0);
  for (const auto& c : cs) {
    balance[c.v] += c.weight;
    balance[c.u] -= c.weight;
  }
  int S = n, T = n + 1;
  Mcmf flow(n + 2);
  i64 total = 0;
  for (const auto& c : cs) flow.add(c.u, c.v, kInf, -c.min_gap);
  for (int v = 0; v < n; ++v) {
    if (balance[v] > 0) {
      flow.add(S, v, balance[v], 0);
      total += balance[v];
    } else if (balance[v] < 0) {
      flow.add(v, T, -balance[v], 0);
    }
  }
  bool ok = flow.run(S, T, total);
  TESSERA_CHECK(ok, "difference LP: dual flow did not saturate");

  Vec pot = flow.potentials();
  res.d.assign(n, 0);
  for (int v = 0; v < n; ++v) res.d[v] = -pot[v];

  // deterministic canonical form: push each variable down its inbound slack
  // when that cannot worsen the objective, then normalize components to 0.
  Vec w_in(n, 0), w_out(n, 0);
  for (const auto& c : cs) {
    w_in[c.v] += c.weight;
    w_out[c.u] += c.weight;
  }
  for (int pass = 0; pass < n; ++pass) {
    bool moved = false;
    for (int v = 0; v < n; ++v) {
      if (w_in[v] < w_out[v]) continue;
      i64 slack = kInf;
      for (const auto& c : cs)
        if (c.v == v) slack = std::min(slack, res.d[v] - res.d[c.u] - c.min_gap);
      if (w_in[v] == w_out[v] && slack > 0 && slack < kInf) {
        res.d[v] -= slack;
        moved = true;
      } else if (w_in[v] > w_out[v]) {
        TESSERA_CHECK(slack == 0 || slack == kInf,
                      "difference LP: optimality violated");
      }
    }
    if (!moved) break;
  }
  // per-component normalization to min 0
  {
    std::vector<int> comp(n, -1);
    std::vector<std::vector<int>> adj(n);
    for (const auto& c : cs) {
      adj[c.u].push_back(c.v);
      adj[c.v].push_back(c.u);
    }
    int nc = 0;
    for (int v = 0; v < n; ++v) {
      if (comp[v] >= 0) continue;
      std::vector<int> stack{v};
      comp[v] = nc;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int x : adj[u])
          if (comp[x] < 0) {
            comp[x] = nc;
            stack.push_back(x);
          }
      }
      ++nc;
    }
    Vec mn(nc, kInf);
    for (int v = 0; v < n; ++v) mn[comp[v]] = std::min(mn[comp[v]], res.d[v]);
    for (int v = 0; v < n; ++v) res.d[v] -= mn[comp[v]];
  }

  res.objective = 0;
  for (const auto& c : cs) {
    i64 slack = res.d[c.v] - res.d[c.u] - c.min_gap;
    TESSERA_CHECK(slack >= 0, "difference LP: produced infeasible solution");
    res.objective += c.weight * slack;
  }
  res.feasible = true;
  return res;
}

IlpResult solve_01_ilp(const ZeroOneProgram& p) {
  IlpResult res;
  i64 max_live = 0;
  for (const auto& a : p.active) max_live = std::max<i64>(max_live, i64(a.size()));
  if (p.n_ports < max_live) {
    res.feasible = false;
    return res;
  }
  int n_df = int(p.active.size());

  std::set<std::pair<int, int>> used;
  std::vector<std::vector<int>> cur(n_df, std::vector<int>(p.n_pins, -1));
  IlpResult best;
  best.objective = kInf;

  std::function<void(int, int, std::vector<char>&)> go =
      [&](int k, int idx, std::vector<char>& taken) {
        if (i64(used.size()) >= best.objective) return;  // bound
        if (k == n_df) {
          best.objective = i64(used.size());
          best.port_of = cur;
          best.feasible = true;
          return;
        }
        if (idx == int(p.active[k].size())) {
          std::vector<char> fresh(p.n_ports, 0);
          go(k + 1, 0, fresh);
          return;
        }
        int pin = p.active[k][idx];
        // try reusing an existing connection first, then fresh ports, both in
        // ascending port order (deterministic lexicographic witness)
        for (int pass = 0; pass < 2; ++pass) {
          for (int j = 0; j < p.n_ports; ++j) {
            if (taken[j]) continue;
            bool exists = used.count({pin, j}) != 0;
            if ((pass == 0) != exists) continue;
            taken[j] = 1;
            cur[k][pin] = j;
            bool added = !exists;
            if (added) used.insert({pin, j});
            go(k, idx + 1, taken);
            if (added) used.erase({pin, j});
            cur[k][pin] = -1;
            taken[j] = 0;
          }
        }
      };
  std::vector<char> taken(p.n_ports, 0);
  go(0, 0, taken);
  TESSERA_CHECK(best.feasible, "0-1 program must be feasible when ports >= max|A(k)|");
  return best;
}

}  // namespace tessera

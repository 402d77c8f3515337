#include "tessera/arborescence.hpp"

#include <algorithm>

namespace tessera {

namespace {

struct Ed {
  int u, v;
  i64 w;
  int parent;  // index into previous level's edge list (or input list at level 0)
  int order;   // original input position, for deterministic tie-breaks
};

struct Level {
  std::vector<Ed> edges;
  std::vector<int> pick;  // per node: index into edges, -1 for root
  std::vector<std::vector<int>> cycles;
  std::vector<int> comp;  // node -> next-level node
  int n = 0;
  int root = 0;
};

}  // namespace

ArborResult min_root_arborescence(int n_nodes, const std::vector<ArborEdge>& in_edges,
                                  i64 root_penalty) {
  ArborResult res;
  res.parent_edge.assign(n_nodes, -1);
  if (n_nodes == 0) return res;

  const int root = n_nodes;  // virtual super-root
  std::vector<Ed> edges;
  edges.reserve(in_edges.size() + n_nodes);
  for (size_t i = 0; i < in_edges.size(); ++i)
    edges.push_back({in_edges[i].src, in_edges[i].dst, in_edges[i].cost,
                     int(i), int(i)});
  for (int v = 0; v < n_nodes; ++v)
    edges.push_back({root, v, root_penalty, -1 - v, int(in_edges.size()) + v});

  std::vector<Level> levels;
  int n = n_nodes + 1;
  int cur_root = root;
  while (true) {
    Level lv;
    lv.n = n;
    lv.root = cur_root;
    lv.edges = std::move(edges);
    lv.pick.assign(n, -1);
    for (size_t i = 0; i < lv.edges.size(); ++i) {
      const Ed& e = lv.edges[i];
      if (e.v == cur_root || e.u == e.v) continue;
      int& p = lv.pick[e.v];
      if (p < 0 || e.w < lv.edges[p].w ||
          (e.w == lv.edges[p].w && e.order < lv.edges[p].order))
        p = int(i);
    }
    for (int v = 0; v < n; ++v)
      if (v != cur_root && lv.pick[v] < 0)
        throw InternalError("arborescence: node without inbound edge");

    // cycle detection over the pick graph
    std::vector<int> vis(n, -1), incyc(n, -1);
    for (int v = 0; v < n; ++v) {
      if (v == cur_root) continue;
      int u = v;
      while (u != cur_root && vis[u] == -1) {
        vis[u] = v;
        u = lv.edges[lv.pick[u]].u;
      }
      if (u != cur_root && vis[u] == v && incyc[u] == -1) {
        std::vector<int> cyc;
        int x = u;
        do {
          incyc[x] = int(lv.cycles.size());
          cyc.push_back(x);
          x = lv.edges[lv.pick[x]].u;
        } while (x != u);
        lv.cycles.push_back(cyc);
      }
    }
    if (lv.cycles.empty()) {
      levels.push_back(std::move(lv));
      break;
    }

    // contract
    lv.comp.assign(n, -1);
    int m = 0;
    for (size_t c = 0; c < lv.cycles.size(); ++c) {
      for (int x : lv.cycles[c]) lv.comp[x] = m;
      ++m;
    }
    for (int v = 0; v < n; ++v)
      if (lv.comp[v] == -1) lv.comp[v] = m++;
    std::vector<Ed> next;
    for (size_t i = 0; i < lv.edges.size(); ++i) {
      const Ed& e = lv.edges[i];
      int nu = lv.comp[e.u], nv = lv.comp[e.v];
      if (nu == nv) continue;
      i64 w = e.w;
      if (incyc[e.v] >= 0) w -= lv.edges[lv.pick[e.v]].w;
      next.push_back({nu, nv, w, int(i), e.order});
    }
    int next_root = lv.comp[cur_root];
    levels.push_back(std::move(lv));
    edges = std::move(next);
    n = m;
    cur_root = next_root;
  }

  // unwind selections
  std::vector<int> sel;  // edge indices at current level
  {
    const Level& top = levels.back();
    for (int v = 0; v < top.n; ++v)
      if (v != top.root) sel.push_back(top.pick[v]);
  }
  for (size_t li = levels.size() - 1; li-- > 0;) {
    const Level& lv = levels[li];
    std::vector<int> lower;
    std::vector<char> entered(lv.n, 0);
    for (int ei : sel) {
      int pe = levels[li + 1].edges[ei].parent;
      lower.push_back(pe);
      entered[lv.edges[pe].v] = 1;
    }
    for (const auto& cyc : lv.cycles)
      for (int x : cyc)
        if (!entered[x]) lower.push_back(lv.pick[x]);
    sel = std::move(lower);
  }

  for (int ei : sel) {
    const Ed& e = levels[0].edges[ei];
    if (e.parent >= 0) {
      res.parent_edge[e.v] = e.parent;
      res.total_cost += in_edges[e.parent].cost;
    } else {
      res.parent_edge[-1 - e.parent] = -1;
    }
  }
  for (int v = 0; v < n_nodes; ++v)
    if (res.parent_edge[v] < 0) res.roots.push_back(v);
  return res;
}

i64 default_root_penalty(const Vec& grid, const std::vector<ReuseSolution>& candidates) {
  i64 sum = 1;
  for (const auto& c : candidates) {
    bool zero = std::all_of(c.delta_s.begin(), c.delta_s.end(),
                            [](i64 x) { return x == 0; });
    if (zero) continue;
    for_each_point(grid, [&](const Vec& s) {
      for (size_t i = 0; i < s.size(); ++i) {
        i64 d = s[i] + c.delta_s[i];
        if (d < 0 || d >= grid[i]) return;
      }
      sum = checked_add(sum, c.fifo_depth);
    });
  }
  return sum;
}

GridArborescence min_arborescence(const Vec& grid,
                                  const std::vector<ReuseSolution>& candidates,
                                  bool reversed, i64 root_penalty) {
  std::vector<Vec> fus;
  for_each_point(grid, [&](const Vec& s) { fus.push_back(s); });
  auto fu_id = [&](const Vec& s) -> int {
    for (size_t i = 0; i < s.size(); ++i)
      if (s[i] < 0 || s[i] >= grid[i]) return -1;
    return int(linearize(s, grid));
  };

  struct Inst {
    Vec src, dst;
    int sol;
    i64 cost;
  };
  std::vector<Inst> inst;
  for (size_t ci = 0; ci < candidates.size(); ++ci) {
    const auto& c = candidates[ci];
    bool zero = std::all_of(c.delta_s.begin(), c.delta_s.end(),
                            [](i64 x) { return x == 0; });
    if (zero) continue;  // holds bypass the spanning computation
    for (const Vec& s : fus) {
      Vec d(s.size());
      for (size_t i = 0; i < s.size(); ++i) d[i] = s[i] + c.delta_s[i];
      if (fu_id(d) < 0) continue;
      inst.push_back({s, d, int(ci), c.fifo_depth});
    }
  }
  // canonical order: cost, then src, dst, solution index
  std::sort(inst.begin(), inst.end(), [](const Inst& a, const Inst& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.src != b.src) return a.src < b.src;
    if (a.dst != b.dst) return a.dst < b.dst;
    return a.sol < b.sol;
  });

  std::vector<ArborEdge> edges;
  edges.reserve(inst.size());
  for (const auto& e : inst) {
    int u = fu_id(e.src), v = fu_id(e.dst);
    if (reversed) std::swap(u, v);
    edges.push_back({u, v, e.cost});
  }
  ArborResult r = min_root_arborescence(int(fus.size()), edges, root_penalty);

  GridArborescence out;
  out.total_cost = r.total_cost;
  for (int v = 0; v < int(fus.size()); ++v) {
    int pe = r.parent_edge[v];
    if (pe < 0) continue;
    const Inst& e = inst[pe];
    out.edges.push_back({e.src, e.dst, e.sol, e.cost});
  }
  std::sort(out.edges.begin(), out.edges.end(),
            [](const GridArborescence::Edge& a, const GridArborescence::Edge& b) {
              if (a.src != b.src) return a.src < b.src;
              return a.dst < b.dst;
            });
  for (int v : r.roots) out.roots.push_back(fus[v]);
  return out;
}

}  // namespace tessera

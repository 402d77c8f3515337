#include "tessera/plan.hpp"

#include <algorithm>
#include <queue>

namespace tessera {

bool fu_in_grid(const Vec& s, const Vec& grid) {
  for (size_t i = 0; i < s.size(); ++i)
    if (s[i] < 0 || s[i] >= grid[i]) return false;
  return true;
}

namespace {

Vec fu_add(const Vec& s, const Vec& d) {
  Vec r(s.size());
  for (size_t i = 0; i < s.size(); ++i) r[i] = s[i] + d[i];
  return r;
}

Vec fu_sub(const Vec& s, const Vec& d) {
  Vec r(s.size());
  for (size_t i = 0; i < s.size(); ++i) r[i] = s[i] - d[i];
  return r;
}

bool is_zero(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](i64 x) { return x == 0; });
}

std::vector<Window> solution_windows(const ReuseSolution& sol, const Vec& for_sizes) {
  std::vector<Window> ws;
  if (sol.kind == ReuseKind::Direct) return ws;  // always valid
  ws.push_back(window_of(sol.delta_t, for_sizes));
  for (const Vec& alt : sol.same_depth_alts)
    ws.push_back(window_of(alt, for_sizes));
  return ws;
}

PlanEdge* find_edge(std::vector<PlanEdge>& edges, const Vec& src, const Vec& dst,
                    ReuseKind kind) {
  for (auto& e : edges)
    if (e.src == src && e.dst == dst && e.kind == kind) return &e;
  return nullptr;
}

}  // namespace

// ---- Fig. 5 heuristic -------------------------------------------------------

FusedChains plan_chains(const std::string& tensor,
                        const std::vector<DfChainInput>& dfs, bool longest_first) {
  int n_df = int(dfs.size());
  FusedChains out;
  out.roots_per_df.resize(n_df);

  struct Chain {
    int df;
    std::vector<Vec> fus;  // sorted
    Vec root;              // filled when built
    bool built = false;
  };
  std::vector<Chain> chains;

  // Step 1: per dataflow, partition FUs into chains (components mutually
  // connectable by direct interconnections).
  for (int k = 0; k < n_df; ++k) {
    const auto& in = dfs[k];
    std::map<Vec, int> comp;
    std::vector<Vec> fus;
    for_each_point(in.grid, [&](const Vec& s) { fus.push_back(s); });
    for (const Vec& s : fus)
      if (!comp.count(s)) {
        int id = int(chains.size());
        std::vector<Vec> members;
        std::queue<Vec> q;
        q.push(s);
        comp[s] = id;
        while (!q.empty()) {
          Vec u = q.front();
          q.pop();
          members.push_back(u);
          for (const auto& sol : in.direct) {
            for (const Vec& v : {fu_add(u, sol.delta_s), fu_sub(u, sol.delta_s)}) {
              if (!fu_in_grid(v, in.grid) || comp.count(v)) continue;
              comp[v] = id;
              q.push(v);
            }
          }
        }
        std::sort(members.begin(), members.end());
        chains.push_back({k, std::move(members), {}, false});
      }
  }

  // Processing order: shortest chain first (configurable), then dataflow
  // index, then smallest member coordinate.
  std::vector<int> order(chains.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    size_t sa = chains[a].fus.size(), sb = chains[b].fus.size();
    if (sa != sb) return longest_first ? sa > sb : sa < sb;
    if (chains[a].df != chains[b].df) return chains[a].df < chains[b].df;
    return chains[a].fus.front() < chains[b].fus.front();
  });

  std::set<Vec> data_nodes;  // provisional labels, for root tie-breaks

  for (int ci : order) {
    Chain& chain = chains[ci];
    const auto& in = dfs[chain.df];
    std::set<Vec> members(chain.fus.begin(), chain.fus.end());

    auto inbound_direct_count = [&](const Vec& u) {
      int c = 0;
      for (const auto& sol : in.direct)
        if (members.count(fu_sub(u, sol.delta_s))) ++c;
      return c;
    };

    // Step 2: FUs with possible input delay interconnections.
    std::vector<Vec> candidates;
    for (const Vec& u : chain.fus)
      for (const auto& sol : in.delay)
        if (fu_in_grid(fu_sub(u, sol.delta_s), in.grid)) {
          candidates.push_back(u);
          break;
        }
    // Step 3: fall back to every chain member.
    if (candidates.empty()) candidates = chain.fus;

    // Step 4: least inbound direct interconnections; prefer FUs already
    // labeled with a data node; then smallest coordinate.
    Vec root = candidates.front();
    auto key = [&](const Vec& u) {
      return std::tuple<int, int, Vec>(inbound_direct_count(u),
                                       data_nodes.count(u) ? 0 : 1, u);
    };
    for (const Vec& u : candidates)
      if (key(u) < key(root)) root = u;

    chain.root = root;
    chain.built = true;
    data_nodes.insert(root);
    out.roots_per_df[chain.df].push_back(root);

    // Step 5: BFS from the root, preferring neighbors that root already-built
    // chains, longest built chain first.
    auto chain_len_rooted_at = [&](const Vec& v) -> i64 {
      i64 best = -1;
      for (const Chain& c : chains)
        if (c.built && c.root == v) best = std::max<i64>(best, i64(c.fus.size()));
      return best;
    };
    std::set<Vec> visited{root};
    std::queue<Vec> q;
    q.push(root);
    while (!q.empty()) {
      Vec u = q.front();
      q.pop();
      struct Cand {
        Vec v;
        Vec delta;
        i64 depth;
      };
      std::vector<Cand> next;
      for (const auto& sol : in.direct) {
        Vec v = fu_add(u, sol.delta_s);
        if (!members.count(v) || visited.count(v)) continue;
        next.push_back({v, sol.delta_s, sol.fifo_depth});
      }
      std::sort(next.begin(), next.end(), [&](const Cand& a, const Cand& b) {
        i64 la = chain_len_rooted_at(a.v), lb = chain_len_rooted_at(b.v);
        bool ra = la >= 0, rb = lb >= 0;
        if (ra != rb) return ra;     // built-chain roots first
        if (la != lb) return la > lb;  // longest built chain first
        return a.v < b.v;
      });
      for (const auto& c : next) {
        if (visited.count(c.v)) continue;
        visited.insert(c.v);
        q.push(c.v);
        PlanEdge* e = find_edge(out.edges, u, c.v, ReuseKind::Direct);
        if (!e) {
          out.edges.push_back({});
          e = &out.edges.back();
          e->tensor = tensor;
          e->src = u;
          e->dst = c.v;
          e->kind = ReuseKind::Direct;
          e->per_df.resize(n_df);
        }
        auto& pd = e->per_df[chain.df];
        pd.active = true;
        pd.depth = timestamp_bias(c.delta, in.control);
        pd.delta_t.assign(dfs[chain.df].direct.empty()
                              ? 0
                              : dfs[chain.df].direct.front().delta_t.size(),
                          0);
      }
    }
  }

  for (auto& df_roots : out.roots_per_df) std::sort(df_roots.begin(), df_roots.end());
  for (auto& e : out.edges)
    for (const auto& pd : e.per_df)
      if (pd.active) e.physical_depth = std::max(e.physical_depth, pd.depth);
  return out;
}

// ---- delay edges between roots ---------------------------------------------

void attach_delay_edges(const FusedDesignSpec& spec, TensorPlan& plan,
                        const std::vector<std::vector<ReuseSolution>>& delay_by_df) {
  int n_df = int(spec.dataflows.size());
  for (int k = 0; k < n_df; ++k) {
    const DataflowSpec& df = spec.dataflows[k];
    const std::vector<Vec>& roots = plan.roots_per_df[k];
    if (plan.is_output || roots.empty()) {
      // outputs commit at their roots; no partial-sum forwarding across
      // chains (a delayed output edge would drop boundary partials)
      for (const Vec& r : roots) plan.data_nodes[r].insert(k);
      continue;
    }
    std::map<Vec, int> idx;
    for (size_t i = 0; i < roots.size(); ++i) idx[roots[i]] = int(i);

    struct Cand {
      int src, dst, sol;
      i64 cost;
    };
    std::vector<Cand> cands;
    for (size_t si = 0; si < delay_by_df[k].size(); ++si) {
      const auto& sol = delay_by_df[k][si];
      if (is_zero(sol.delta_s)) continue;
      for (const Vec& r : roots) {
        Vec d = fu_add(r, sol.delta_s);
        auto it = idx.find(d);
        if (it == idx.end()) continue;
        cands.push_back({idx.at(r), it->second, int(si), sol.fifo_depth});
      }
    }
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      if (a.cost != b.cost) return a.cost < b.cost;
      if (roots[a.src] != roots[b.src]) return roots[a.src] < roots[b.src];
      return roots[a.dst] < roots[b.dst];
    });
    std::vector<ArborEdge> edges;
    for (const auto& c : cands) edges.push_back({c.src, c.dst, c.cost});
    i64 penalty = spec.hardware.root_penalty
                      ? *spec.hardware.root_penalty
                      : [&] {
                          i64 s = 1;
                          for (const auto& c : cands) s = checked_add(s, c.cost);
                          return s;
                        }();
    ArborResult res = min_root_arborescence(int(roots.size()), edges, penalty);
    for (int v = 0; v < int(roots.size()); ++v) {
      int pe = res.parent_edge[v];
      if (pe < 0) {
        plan.data_nodes[roots[v]].insert(k);  // root keeps its data node
        continue;
      }
      const Cand& c = cands[pe];
      const ReuseSolution& sol = delay_by_df[k][c.sol];
      PlanEdge* e = find_edge(plan.edges, roots[c.src], roots[c.dst], ReuseKind::Delay);
      if (!e) {
        plan.edges.push_back({});
        e = &plan.edges.back();
        e->tensor = plan.tensor;
        e->src = roots[c.src];
        e->dst = roots[c.dst];
        e->kind = ReuseKind::Delay;
        e->per_df.resize(n_df);
      }
      auto& pd = e->per_df[k];
      pd.active = true;
      pd.depth = sol.fifo_depth;
      pd.delta_t = sol.delta_t;
      pd.windows = solution_windows(sol, df.for_sizes);
      e->physical_depth = std::max(e->physical_depth, pd.depth);
    }
  }
}

// ---- full front-end plan ----------------------------------------------------

namespace {

/// Promotes FUs whose active inbound edge plus hold never cover some cycle.
void coverage_promote(const FusedDesignSpec& spec, TensorPlan& plan) {
  if (plan.is_output) return;  // inputs only; outputs accumulate from zero
  int n_df = int(spec.dataflows.size());
  for (int k = 0; k < n_df; ++k) {
    const DataflowSpec& df = spec.dataflows[k];
    const HoldInfo& hold = plan.hold[k];
    for_each_point(df.par_sizes, [&](const Vec& s) {
      const PlanEdge* inbound = nullptr;
      for (const auto& e : plan.edges)
        if (e.dst == s && e.per_df[k].active) {
          inbound = &e;
          break;
        }
      auto it = plan.data_nodes.find(s);
      if (it != plan.data_nodes.end() && it->second.count(k)) return;  // has memory
      bool gap = false;
      for_each_point(df.for_sizes, [&](const Vec& t) {
        if (gap) return;
        if (inbound) {
          const auto& pd = inbound->per_df[k];
          if (pd.windows.empty()) return;  // direct edge: always valid
          for (const auto& w : pd.windows)
            if (w.contains(t)) return;
        }
        if (hold.present)
          for (const auto& w : hold.windows)
            if (w.contains(t)) return;
        gap = true;
      });
      if (gap) plan.data_nodes[s].insert(k);
    });
  }
}

}  // namespace

InterconnectPlan build_plan(const FusedDesignSpec& spec) {
  InterconnectPlan plan;
  int n_df = int(spec.dataflows.size());
  const auto& tensors = spec.workload.tensors;

  plan.solutions.resize(n_df);
  for (int k = 0; k < n_df; ++k) {
    plan.solutions[k].resize(tensors.size());
    for (size_t ti = 0; ti < tensors.size(); ++ti) {
      auto sols = solve_direct(spec, spec.dataflows[k], tensors[ti].name);
      auto delays = solve_delay(spec, spec.dataflows[k], tensors[ti].name);
      sols.insert(sols.end(), delays.begin(), delays.end());
      for (const auto& s : sols)
        TESSERA_CHECK(reuse_equation_holds(spec, spec.dataflows[k], s),
                      "reuse solution fails its defining equation");
      plan.solutions[k][ti] = std::move(sols);
    }
  }

  for (size_t ti = 0; ti < tensors.size(); ++ti) {
    TensorPlan tp;
    tp.tensor = tensors[ti].name;
    tp.is_output = tensors[ti].role == TensorRole::Output;
    tp.hold.resize(n_df);
    tp.roots_per_df.resize(n_df);

    std::vector<std::vector<ReuseSolution>> delay_by_df(n_df);
    std::vector<DfChainInput> chain_inputs(n_df);
    for (int k = 0; k < n_df; ++k) {
      const DataflowSpec& df = spec.dataflows[k];
      for (const auto& sol : plan.solutions[k][ti]) {
        if (sol.kind == ReuseKind::Direct) chain_inputs[k].direct.push_back(sol);
        else if (is_zero(sol.delta_s)) {
          auto& h = tp.hold[k];
          h.present = true;
          h.depth = sol.fifo_depth;
          h.delta_t = sol.delta_t;
          h.windows = solution_windows(sol, df.for_sizes);
        } else {
          delay_by_df[k].push_back(sol);
        }
      }
      chain_inputs[k].grid = df.par_sizes;
      chain_inputs[k].control = df.control;
      chain_inputs[k].delay = delay_by_df[k];
    }

    if (n_df == 1) {
      const DataflowSpec& df = spec.dataflows[0];
      std::vector<ReuseSolution> cands = chain_inputs[0].direct;
      if (!tp.is_output)
        cands.insert(cands.end(), delay_by_df[0].begin(), delay_by_df[0].end());
      i64 penalty = spec.hardware.root_penalty
                        ? *spec.hardware.root_penalty
                        : default_root_penalty(df.par_sizes, cands);
      GridArborescence arbor =
          min_arborescence(df.par_sizes, cands, tp.is_output, penalty);
      for (const auto& e : arbor.edges) {
        const ReuseSolution& sol = cands[e.solution];
        PlanEdge pe;
        pe.tensor = tp.tensor;
        pe.src = e.src;
        pe.dst = e.dst;
        pe.kind = sol.kind;
        pe.per_df.resize(1);
        pe.per_df[0].active = true;
        pe.per_df[0].depth = sol.fifo_depth;
        pe.per_df[0].delta_t = sol.delta_t;
        pe.per_df[0].windows = solution_windows(sol, df.for_sizes);
        pe.physical_depth = sol.fifo_depth;
        tp.edges.push_back(std::move(pe));
      }
      tp.roots_per_df[0] = arbor.roots;
      for (const Vec& r : arbor.roots) tp.data_nodes[r].insert(0);
    } else if (tp.is_output) {
      // partials flow toward committing roots: fuse the per-dataflow
      // reversed arborescences by edge union (the Fig. 5 heuristic targets
      // input broadcast chains)
      for (int k = 0; k < n_df; ++k) {
        const DataflowSpec& df = spec.dataflows[k];
        const auto& cands = chain_inputs[k].direct;
        i64 penalty = spec.hardware.root_penalty
                          ? *spec.hardware.root_penalty
                          : default_root_penalty(df.par_sizes, cands);
        GridArborescence arbor = min_arborescence(df.par_sizes, cands, true, penalty);
        for (const auto& e : arbor.edges) {
          const ReuseSolution& sol = cands[e.solution];
          PlanEdge* pe = find_edge(tp.edges, e.src, e.dst, sol.kind);
          if (!pe) {
            tp.edges.push_back({});
            pe = &tp.edges.back();
            pe->tensor = tp.tensor;
            pe->src = e.src;
            pe->dst = e.dst;
            pe->kind = sol.kind;
            pe->per_df.resize(n_df);
          }
          pe->per_df[k].active = true;
          pe->per_df[k].depth = sol.fifo_depth;
          pe->per_df[k].delta_t = sol.delta_t;
          pe->per_df[k].windows = solution_windows(sol, df.for_sizes);
          pe->physical_depth = std::max(pe->physical_depth, sol.fifo_depth);
        }
        tp.roots_per_df[k] = arbor.roots;
        for (const Vec& r : arbor.roots) tp.data_nodes[r].insert(k);
      }
    } else {
      FusedChains fused = plan_chains(tp.tensor, chain_inputs,
                                      spec.hardware.chains_longest_first);
      tp.edges = std::move(fused.edges);
      tp.roots_per_df = std::move(fused.roots_per_df);
      attach_delay_edges(spec, tp, delay_by_df);
    }

    coverage_promote(spec, tp);

    std::sort(tp.edges.begin(), tp.edges.end(),
              [](const PlanEdge& a, const PlanEdge& b) {
                if (a.src != b.src) return a.src < b.src;
                if (a.dst != b.dst) return a.dst < b.dst;
                return a.kind < b.kind;
              });
    plan.tensors.push_back(std::move(tp));
  }
  return plan;
}

}  // namespace tessera

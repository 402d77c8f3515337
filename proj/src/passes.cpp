#include "tessera/passes.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "tessera/lpsolve.hpp"

namespace tessera {

namespace {

bool static_source(const Dag& dag, int node) {
  Prim k = dag.node(node).kind;
  return k == Prim::ConfigReg || k == Prim::InPort || k == Prim::ClockGate;
}

i64 node_latency(const DagNode& n, const LatencyTable& lat) {
  switch (n.kind) {
    case Prim::Mul: return lat.mul;
    case Prim::Add: return lat.add;
    case Prim::Mux: return lat.mux;
    case Prim::AddressGen: return lat.addrgen;
    case Prim::ConstMatMul: return lat.matmul;
    case Prim::Counter: return lat.counter;
    case Prim::MemRead: return lat.memread;
    case Prim::ShiftLeft: return lat.shift;
    case Prim::Reducer: {
      i64 l = 0;
      while ((i64(1) << l) < i64(n.inputs.size())) ++l;
      return l;
    }
    default: return 0;
  }
}

void splice_out(Dag& dag, int node) {
  // bypass a single-input node and mark it dead
  PinRef src = dag.node(node).inputs[0];
  for (auto& nd : dag.nodes) {
    if (nd.dead) continue;
    for (auto& in : nd.inputs)
      if (in.node == node) in = src;
  }
  dag.node(node).dead = true;
}

}  // namespace

// ---- per-dataflow analysis --------------------------------------------------

DfAnalysis analyze_dataflow(const Dag& dag, const std::string& output_tensor, int k) {
  DfAnalysis a;
  int n = int(dag.nodes.size());
  a.cval.assign(n, std::nullopt);
  a.live.assign(n, 0);

  // constant folding to fixpoint (loops stay unknown)
  bool changed = true;
  int guard = 0;
  while (changed && guard++ < 64) {
    changed = false;
    for (const auto& nd : dag.nodes) {
      if (nd.dead || a.cval[nd.id]) continue;
      std::optional<i64> v;
      auto in_c = [&](size_t i) -> std::optional<i64> {
        if (i >= nd.inputs.size() || nd.inputs[i].node < 0) return std::nullopt;
        const auto& src = dag.node(nd.inputs[i].node);
        if (src.kind == Prim::Counter) return std::nullopt;
        return a.cval[src.id];
      };
      switch (nd.kind) {
        case Prim::ConfigReg: v = nd.df_value[size_t(k)]; break;
        case Prim::ClockGate: v = in_c(0); break;
        case Prim::Delay:
        case Prim::Fifo: v = in_c(0); break;  // steady state
        case Prim::Mux: {
          auto sel = in_c(0);
          if (sel) {
            size_t pin = size_t(1 + *sel);
            if (pin < nd.inputs.size()) v = in_c(pin);
          }
          break;
        }
        case Prim::Add: {
          auto x = in_c(0), y = in_c(1);
          if (x && y) v = *x + *y;
          break;
        }
        case Prim::Mul: {
          auto x = in_c(0), y = in_c(1);
          if ((x && *x == 0) || (y && *y == 0)) v = 0;
          else if (x && y) v = checked_mul(*x, *y);
          break;
        }
        case Prim::ShiftLeft: {
          auto x = in_c(0), y = in_c(1);
          if (x && *x == 0) v = 0;
          else if (x && y && *y >= 0 && *y < 62) v = checked_mul(*x, i64(1) << *y);
          break;
        }
        case Prim::Reducer: {
          i64 sum = 0;
          bool all = true;
          for (size_t i = 0; i < nd.inputs.size() && all; ++i) {
            auto x = in_c(i);
            if (x) sum += *x;
            else all = false;
          }
          if (all) v = sum;
          break;
        }
        default: break;
      }
      if (v) {
        a.cval[nd.id] = v;
        changed = true;
      }
    }
  }

  // backward liveness from output-tensor MemWrites, per the dataflow's
  // resolved constants
  std::vector<int> stack;
  for (const auto& nd : dag.nodes) {
    if (nd.dead || nd.kind != Prim::MemWrite || nd.tensor != output_tensor) continue;
    // skip writes whose enable folds to constant zero
    const auto& en = nd.inputs[2];
    if (en.node >= 0 && a.cval[en.node] && *a.cval[en.node] == 0) continue;
    a.live[nd.id] = 1;
    stack.push_back(nd.id);
  }
  while (!stack.empty()) {
    const DagNode& nd = dag.node(stack.back());
    stack.pop_back();
    auto visit = [&](PinRef in) {
      if (in.node < 0) return;
      if (a.cval[in.node]) return;  // constants carry no dependency
      if (!a.live[in.node]) {
        a.live[in.node] = 1;
        stack.push_back(in.node);
      }
    };
    if (nd.kind == Prim::Mux) {
      auto sel = nd.inputs[0].node >= 0 ? a.cval[nd.inputs[0].node] : std::nullopt;
      if (sel) {
        size_t pin = size_t(1 + *sel);
        if (pin < nd.inputs.size()) visit(nd.inputs[pin]);
      } else {
        for (const auto& in : nd.inputs) visit(in);
      }
      continue;
    }
    for (const auto& in : nd.inputs) visit(in);
  }
  return a;
}

// ---- delay matching ---------------------------------------------------------

namespace {

struct MatchContext {
  std::vector<int> var_of;   // node -> LP variable
  std::vector<int> node_of;  // variable -> node
  DifferenceLP lp;
  std::vector<int> comp;     // SCC ids
};

int out_width(const DagNode& n, int pin) {
  if (n.kind == Prim::Counter && pin < int(n.pin_widths.size()))
    return n.pin_widths[size_t(pin)];
  return n.width ? n.width : 1;
}

MatchContext build_lp(Dag& dag, const LatencyTable& lat, bool grouped) {
  MatchContext mc;
  mc.var_of.assign(dag.nodes.size(), -1);
  for (auto& nd : dag.nodes) {
    if (nd.dead) continue;
    nd.latency = node_latency(nd, lat);
    mc.var_of[nd.id] = int(mc.node_of.size());
    mc.node_of.push_back(nd.id);
  }
  mc.comp = scc_components(dag);

  int n_vars = int(mc.node_of.size());
  // broadcast groups: one aux variable per multi-fanout source pin
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> fan;  // src pin -> (node, pin idx)
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    for (size_t i = 0; i < nd.inputs.size(); ++i) {
      const auto& in = nd.inputs[i];
      if (in.node < 0 || static_source(dag, in.node)) continue;
      fan[{in.node, in.pin}].push_back({nd.id, int(i)});
    }
  }
  mc.lp.n_vars = n_vars;
  for (const auto& [src, consumers] : fan) {
    bool group = grouped && consumers.size() >= 2;
    int zvar = -1;
    if (group) {
      zvar = mc.lp.n_vars++;
      // Z >= 0 as (Y - D_src >= 0) with objective weight W on (Y - D_src)
      mc.lp.constraints.push_back({mc.var_of[src.first], zvar, 0,
                                   out_width(dag.node(src.first), src.second),
                                   false});
    }
    for (const auto& [cn, cpin] : consumers) {
      const DagNode& cons = dag.node(cn);
      (void)cpin;
      i64 lat_v = cons.latency;
      bool loop_edge = mc.comp[src.first] == mc.comp[cn];
      i64 w = out_width(dag.node(src.first), src.second);
      mc.lp.constraints.push_back({mc.var_of[src.first], mc.var_of[cn], lat_v,
                                   group ? 0 : w, loop_edge});
      if (group && !loop_edge)
        // Y - D_cons >= -L  (i.e. Z >= EL)
        mc.lp.constraints.push_back({mc.var_of[cn], zvar, -lat_v, 0, false});
    }
  }
  return mc;
}

void strip_matching_delays(Dag& dag) {
  for (auto& nd : dag.nodes)
    if (!nd.dead && nd.kind == Prim::Delay && nd.tag == DelayTag::Matching)
      splice_out(dag, nd.id);
}

}  // namespace

void delay_match(Dag& dag, const LatencyTable& lat) {
  strip_matching_delays(dag);
  MatchContext mc = build_lp(dag, lat, false);
  LpResult res = solve_difference_lp(mc.lp);
  if (!res.feasible) {
    std::string msg = "delay matching infeasible; latency cycle through:";
    for (int v : res.violating_cycle)
      if (v < int(mc.node_of.size())) msg += " " + dag.node(mc.node_of[v]).name;
    throw SpecError(msg);
  }
  // insert EL registers edge by edge
  int n_before = int(dag.nodes.size());
  for (int id = 0; id < n_before; ++id) {
    DagNode& nd = dag.nodes[size_t(id)];
    if (nd.dead) continue;
    for (size_t i = 0; i < nd.inputs.size(); ++i) {
      PinRef in = nd.inputs[i];
      if (in.node < 0 || static_source(dag, in.node)) continue;
      if (mc.comp[in.node] == mc.comp[id]) continue;  // zero-capacity loop edge
      i64 el = res.d[mc.var_of[id]] - res.d[mc.var_of[in.node]] - nd.latency;
      TESSERA_CHECK(el >= 0, "delay match: negative EL");
      if (el == 0) continue;
      DagNode d;
      d.kind = Prim::Delay;
      d.depth = el;
      d.tag = DelayTag::Matching;
      d.name = nd.name + "_el" + std::to_string(i);
      d.inputs = {in};
      d.range = dag.node(in.node).kind == Prim::Counter
                    ? dag.node(in.node).pin_ranges[size_t(in.pin)]
                    : dag.node(in.node).range;
      d.width = out_width(dag.node(in.node), in.pin);
      int did = dag.add(std::move(d));
      dag.node(id).inputs[i] = {did, 0};
    }
  }
  for (auto& nd : dag.nodes)
    if (!nd.dead && mc.var_of[nd.id] >= 0) nd.d_level = int(res.d[mc.var_of[nd.id]]);
  dag.matched = true;
}

// ---- broadcast rewiring -----------------------------------------------------

namespace {

i64 register_bits(const Dag& dag) {
  i64 bits = 0;
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    if (nd.kind == Prim::Delay || nd.kind == Prim::Fifo)
      bits += nd.depth * std::max(nd.width, 1);
  }
  return bits;
}

}  // namespace

void rewire_broadcast(Dag& dag, const LatencyTable& lat) {
  i64 before = register_bits(dag);
  Dag snapshot = dag;

  // stage 1: broadcast-aware objective
  strip_matching_delays(dag);
  MatchContext mc = build_lp(dag, lat, true);
  LpResult res = solve_difference_lp(mc.lp);
  TESSERA_CHECK(res.feasible, "rewire: grouped LP infeasible");

  // stage 2: per-source MST over (source->dest, dest<->dest) edges
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> fan;
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    for (size_t i = 0; i < nd.inputs.size(); ++i) {
      const auto& in = nd.inputs[i];
      if (in.node < 0 || static_source(dag, in.node)) continue;
      if (mc.comp[in.node] == mc.comp[nd.id]) continue;  // keep loops intact
      fan[{in.node, in.pin}].push_back({nd.id, int(i)});
    }
  }
  for (const auto& [src, consumers] : fan) {
    if (consumers.size() < 2) continue;
    int m = int(consumers.size());
    std::vector<i64> el(m);
    bool varied = false;
    for (int i = 0; i < m; ++i) {
      const DagNode& c = dag.node(consumers[i].first);
      el[i] = res.d[mc.var_of[c.id]] - res.d[mc.var_of[src.first]] - c.latency;
      varied |= el[i] != el[0];
    }
    if (!varied) {
      // equal delays: chain everyone behind one tap when adjacency allows;
      // the MST below handles it uniformly, so fall through
    }
    struct E {
      int a, b;  // -1 = source
      i64 w;
    };
    std::vector<E> es;
    for (int i = 0; i < m; ++i) es.push_back({-1, i, el[i]});
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const Vec& fa = dag.node(consumers[i].first).fu;
        const Vec& fb = dag.node(consumers[j].first).fu;
        if (fa.empty() || fb.empty() || fa.size() != fb.size()) continue;
        i64 dist = 0;
        for (size_t d = 0; d < fa.size(); ++d) dist += std::abs(fa[d] - fb[d]);
        if (dist != 1) continue;
        es.push_back({i, j, std::abs(el[i] - el[j])});
      }
    std::sort(es.begin(), es.end(), [](const E& x, const E& y) {
      if (x.w != y.w) return x.w < y.w;
      if (x.a != y.a) return x.a < y.a;
      return x.b < y.b;
    });
    // Kruskal over {source} + dests
    std::vector<int> uf(m + 1);
    for (int i = 0; i <= m; ++i) uf[i] = i;
    std::function<int(int)> find = [&](int x) {
      return uf[x] == x ? x : uf[x] = find(uf[x]);
    };
    std::vector<E> tree;
    for (const E& e : es) {
      int a = find(e.a + 1), b = find(e.b + 1);
      if (a == b) continue;
      uf[a] = b;
      tree.push_back(e);
    }
    // orient from the source by BFS, create tap chain
    std::vector<std::vector<std::pair<int, int>>> adj(m + 1);
    for (size_t t = 0; t < tree.size(); ++t) {
      adj[size_t(tree[t].a + 1)].push_back({tree[t].b + 1, int(t)});
      adj[size_t(tree[t].b + 1)].push_back({tree[t].a + 1, int(t)});
    }
    std::vector<int> tap(m + 1, -1);
    std::vector<char> seen(m + 1, 0);
    std::vector<int> bfs{0};
    seen[0] = 1;
    // tap node for the source itself is the source pin
    while (!bfs.empty()) {
      int u = bfs.front();
      bfs.erase(bfs.begin());
      for (auto [v, te] : adj[size_t(u)]) {
        (void)te;
        if (seen[v]) continue;
        seen[v] = 1;
        // v consumes: from source (u==0) or from dest u-1's tap
        PinRef feed = u == 0 ? PinRef{src.first, src.second}
                             : PinRef{tap[size_t(u)], 0};
        DagNode anchor;
        anchor.kind = Prim::Delay;
        anchor.depth = 0;
        anchor.tag = DelayTag::Semantic;
        anchor.name = dag.node(consumers[size_t(v - 1)].first).name + "_tap";
        anchor.inputs = {feed};
        anchor.width = out_width(dag.node(src.first), src.second);
        anchor.range = dag.node(src.first).kind == Prim::Counter
                           ? dag.node(src.first).pin_ranges[size_t(src.second)]
                           : dag.node(src.first).range;
        int a_id = dag.add(std::move(anchor));
        tap[size_t(v)] = a_id;
        auto [cn, cpin] = consumers[size_t(v - 1)];
        dag.node(cn).inputs[size_t(cpin)] = {a_id, 0};
        bfs.push_back(v);
      }
    }
  }

  // stage 3: plain re-match, then the monotonicity guard
  delay_match(dag, lat);
  if (register_bits(dag) > before) dag = std::move(snapshot);
}

// ---- reduction extraction ---------------------------------------------------

void extract_reduction(Dag& dag) {
  auto cons = dag.consumers();
  auto is_chain_add = [&](int id) {
    const DagNode& n = dag.node(id);
    return !n.dead && n.kind == Prim::Add;
  };
  // tails: Adds whose single consumer is not an Add (or with fanout > 1)
  std::vector<int> order = dag.topo_order();
  for (int id : order) {
    if (!is_chain_add(id)) continue;
    bool consumed_by_add = cons[id].size() == 1 &&
                           dag.node(cons[id][0].node).kind == Prim::Add &&
                           !dag.node(cons[id][0].node).dead;
    if (consumed_by_add) continue;  // not a tail
    // gather leaves by walking add-subtrees with single consumption
    std::vector<PinRef> leaves;
    std::function<void(int)> walk = [&](int add_id) {
      for (const auto& in : dag.node(add_id).inputs) {
        bool foldable = in.node >= 0 && dag.node(in.node).kind == Prim::Add &&
                        !dag.node(in.node).dead && cons[in.node].size() == 1;
        if (foldable) walk(in.node);
        else leaves.push_back(in);
      }
    };
    walk(id);
    if (leaves.size() < 3) continue;  // plain adder stays
    // retire the fused adds
    std::function<void(int)> retire = [&](int add_id) {
      for (const auto& in : dag.node(add_id).inputs)
        if (in.node >= 0 && dag.node(in.node).kind == Prim::Add &&
            !dag.node(in.node).dead && cons[in.node].size() == 1)
          retire(in.node);
      dag.node(add_id).dead = true;
    };
    retire(id);
    DagNode r;
    r.kind = Prim::Reducer;
    r.name = dag.node(id).name + "_red";
    r.inputs = leaves;
    r.fu = dag.node(id).fu;
    r.range = dag.node(id).range;
    r.width = dag.node(id).width;
    int rid = dag.add(std::move(r));
    for (const auto& c : cons[id]) dag.node(c.node).inputs[size_t(c.pin)] = {rid, 0};
  }
}

// ---- pin reuse --------------------------------------------------------------

void reuse_pins(Dag& dag, const std::string& output_tensor) {
  std::vector<DfAnalysis> dfa;
  for (int k = 0; k < dag.n_dataflows; ++k)
    dfa.push_back(analyze_dataflow(dag, output_tensor, k));

  int n0 = int(dag.nodes.size());
  for (int id = 0; id < n0; ++id) {
    DagNode& red = dag.nodes[size_t(id)];
    if (red.dead || red.kind != Prim::Reducer) continue;
    int arity = int(red.inputs.size());
    ZeroOneProgram prog;
    prog.n_pins = arity;
    prog.active.resize(size_t(dag.n_dataflows));
    i64 max_live = 0;
    for (int k = 0; k < dag.n_dataflows; ++k) {
      if (!dfa[size_t(k)].live[id]) continue;
      for (int i = 0; i < arity; ++i) {
        int drv = red.inputs[size_t(i)].node;
        auto cv = drv >= 0 ? dfa[size_t(k)].cval[drv] : std::nullopt;
        if (cv && *cv == 0) continue;  // contributes nothing
        prog.active[size_t(k)].push_back(i);
      }
      max_live = std::max<i64>(max_live, i64(prog.active[size_t(k)].size()));
    }
    prog.n_ports = int(max_live);
    if (max_live == 0 || max_live == arity) continue;  // nothing to shrink
    IlpResult sol = solve_01_ilp(prog);
    TESSERA_CHECK(sol.feasible, "pin reuse program infeasible");

    // port -> ordered candidate pin list
    std::vector<std::vector<int>> port_pins(size_t(prog.n_ports));
    for (int k = 0; k < dag.n_dataflows; ++k)
      for (int i : prog.active[size_t(k)]) {
        int j = sol.port_of[size_t(k)][size_t(i)];
        auto& lst = port_pins[size_t(j)];
        if (std::find(lst.begin(), lst.end(), i) == lst.end()) lst.push_back(i);
      }
    for (auto& lst : port_pins) std::sort(lst.begin(), lst.end());

    std::vector<PinRef> old_inputs = red.inputs;
    std::vector<PinRef> new_inputs;
    int zero = -1;
    for (const auto& nd : dag.nodes)
      if (!nd.dead && nd.kind == Prim::ConfigReg &&
          std::all_of(nd.df_value.begin(), nd.df_value.end(),
                      [](i64 v) { return v == 0; })) {
        zero = nd.id;
        break;
      }
    if (zero < 0) {
      DagNode z;
      z.kind = Prim::ConfigReg;
      z.name = red.name + "_zero";
      z.df_value.assign(size_t(dag.n_dataflows), 0);
      zero = dag.add(std::move(z));
    }
    for (int j = 0; j < prog.n_ports; ++j) {
      auto& lst = port_pins[size_t(j)];
      if (lst.empty()) {
        new_inputs.push_back({zero, 0});
        continue;
      }
      bool need_zero = false;
      Vec sel(size_t(dag.n_dataflows), 0);
      for (int k = 0; k < dag.n_dataflows; ++k) {
        int chosen = -1;
        if (k < int(sol.port_of.size()))
          for (int i : prog.active[size_t(k)])
            if (sol.port_of[size_t(k)][size_t(i)] == j) chosen = i;
        if (chosen < 0) {
          need_zero = true;
          sel[size_t(k)] = 0;  // points at the zero slot
        } else {
          auto it = std::find(lst.begin(), lst.end(), chosen);
          sel[size_t(k)] = (it - lst.begin()) + (need_zero || lst.size() > 1 ? 0 : 0);
        }
      }
      if (lst.size() == 1 && !need_zero) {
        new_inputs.push_back(old_inputs[size_t(lst[0])]);
        continue;
      }
      // mux: slot 0 = zero (when needed), then candidates in pin order
      std::vector<PinRef> mux_in;
      DagNode selreg;
      selreg.kind = Prim::ConfigReg;
      selreg.name = red.name + "_port" + std::to_string(j) + "_sel";
      Vec sel_final(size_t(dag.n_dataflows), 0);
      int base = need_zero ? 1 : 0;
      for (int k = 0; k < dag.n_dataflows; ++k) {
        int chosen = -1;
        for (int i : prog.active[size_t(k)])
          if (sol.port_of[size_t(k)][size_t(i)] == j) chosen = i;
        if (chosen < 0) sel_final[size_t(k)] = 0;
        else {
          auto it = std::find(lst.begin(), lst.end(), chosen);
          sel_final[size_t(k)] = base + (it - lst.begin());
        }
      }
      selreg.df_value = sel_final;
      int selid = dag.add(std::move(selreg));
      mux_in.push_back({selid, 0});
      if (need_zero) mux_in.push_back({zero, 0});
      for (int i : lst) mux_in.push_back(old_inputs[size_t(i)]);
      DagNode mux;
      mux.kind = Prim::Mux;
      mux.name = dag.node(id).name + "_port" + std::to_string(j);
      mux.inputs = mux_in;
      mux.fu = dag.node(id).fu;
      int mid = dag.add(std::move(mux));
      new_inputs.push_back({mid, 0});
    }
    dag.node(id).inputs = new_inputs;
  }
}

// ---- power gating -----------------------------------------------------------

void power_gate(Dag& dag, const std::string& output_tensor) {
  std::vector<DfAnalysis> dfa;
  for (int k = 0; k < dag.n_dataflows; ++k)
    dfa.push_back(analyze_dataflow(dag, output_tensor, k));
  int n0 = int(dag.nodes.size());
  for (int id = 0; id < n0; ++id) {
    DagNode& nd = dag.nodes[size_t(id)];
    if (nd.dead || (nd.kind != Prim::Delay && nd.kind != Prim::Fifo)) continue;
    if (nd.depth < 1 || nd.gated) continue;
    Vec mask(size_t(dag.n_dataflows), 0);
    for (int k = 0; k < dag.n_dataflows; ++k)
      mask[size_t(k)] = dfa[size_t(k)].live[id] ? 1 : 0;
    DagNode reg;
    reg.kind = Prim::ConfigReg;
    reg.name = nd.name + "_gate_cfg";
    reg.df_value = mask;
    reg.range = {0, 1};
    reg.width = 1;
    int rid = dag.add(std::move(reg));
    DagNode gate;
    gate.kind = Prim::ClockGate;
    gate.name = nd.name + "_gate";
    gate.inputs = {{rid, 0}};
    gate.range = {0, 1};
    gate.width = 1;
    int gid = dag.add(std::move(gate));
    dag.node(id).gated = true;
    dag.node(id).inputs.push_back({gid, 0});
  }
}

// ---- bit-width inference ----------------------------------------------------

namespace {

Interval iv_union(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

Interval iv_mul(const Interval& a, const Interval& b) {
  i64 c[4] = {checked_mul(a.lo, b.lo), checked_mul(a.lo, b.hi),
              checked_mul(a.hi, b.lo), checked_mul(a.hi, b.hi)};
  return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
}

}  // namespace

void infer_bitwidth_inplace(Dag& dag, const FusedDesignSpec& spec) {
  auto comp = scc_components(dag);
  // group members per SCC and build condensation order via repeated sweeps
  int n = int(dag.nodes.size());
  std::map<int, std::vector<int>> members;
  for (const auto& nd : dag.nodes)
    if (!nd.dead) members[comp[nd.id]].push_back(nd.id);

  std::vector<char> done(n, 0);

  auto input_range = [&](const DagNode& nd, size_t i) -> Interval {
    const PinRef& in = nd.inputs[i];
    const DagNode& src = dag.node(in.node);
    if (src.kind == Prim::Counter) return src.pin_ranges[size_t(in.pin)];
    return src.range;
  };

  std::function<Interval(DagNode&)> transfer = [&](DagNode& nd) -> Interval {
    switch (nd.kind) {
      case Prim::InPort: return {0, 1};
      case Prim::ConfigReg: {
        i64 lo = nd.df_value[0], hi = nd.df_value[0];
        for (i64 v : nd.df_value) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        return {lo, hi};
      }
      case Prim::CompareGE:
      case Prim::ClockGate: return {0, 1};
      case Prim::Counter: {
        nd.pin_ranges.assign(size_t(nd.counter_dims) + 2, {0, 0});
        nd.pin_widths.assign(size_t(nd.counter_dims) + 2, 1);
        i64 total = 1;
        for (int j = 0; j < nd.counter_dims; ++j) {
          i64 mx = 0;
          for (const auto& r : nd.df_radix) mx = std::max(mx, r[size_t(j)] - 1);
          nd.pin_ranges[size_t(j)] = {0, mx};
          nd.pin_widths[size_t(j)] = width_for_range({0, mx});
        }
        for (const auto& r : nd.df_radix) total = std::max(total, vec_product(r));
        nd.pin_ranges[size_t(nd.counter_dims)] = {0, 1};
        nd.pin_widths[size_t(nd.counter_dims)] = 1;
        nd.pin_ranges[size_t(nd.counter_dims) + 1] = {0, total - 1};
        nd.pin_widths[size_t(nd.counter_dims) + 1] = width_for_range({0, total - 1});
        return {0, total - 1};
      }
      case Prim::MemRead: {
        const TensorDecl& t = spec.workload.tensor(nd.tensor);
        int w = t.element_width;
        auto it = spec.hardware.data_width_overrides.find(nd.tensor);
        if (it != spec.hardware.data_width_overrides.end()) w = it->second;
        if (t.element_signed) return {-(i64(1) << (w - 1)), (i64(1) << (w - 1)) - 1};
        return {0, (i64(1) << w) - 1};
      }
      case Prim::Add: return {checked_add(input_range(nd, 0).lo, input_range(nd, 1).lo),
                              checked_add(input_range(nd, 0).hi, input_range(nd, 1).hi)};
      case Prim::Mul: return iv_mul(input_range(nd, 0), input_range(nd, 1));
      case Prim::ShiftLeft: {
        Interval a = input_range(nd, 0), b = input_range(nd, 1);
        if (b.lo < 0) throw SpecError("negative shift amount possible at " + nd.name);
        if (b.hi > 62) throw SpecError("shift amount over 62 at " + nd.name);
        Interval p1 = iv_mul(a, {i64(1) << b.lo, i64(1) << b.lo});
        Interval p2 = iv_mul(a, {i64(1) << b.hi, i64(1) << b.hi});
        return iv_union(p1, p2);
      }
      case Prim::Reducer: {
        Interval acc{0, 0};
        for (size_t i = 0; i < nd.inputs.size(); ++i) {
          Interval x = input_range(nd, i);
          acc = {checked_add(acc.lo, x.lo), checked_add(acc.hi, x.hi)};
        }
        return acc;
      }
      case Prim::Mux: {
        Interval acc = input_range(nd, 1);
        for (size_t i = 2; i < nd.inputs.size(); ++i)
          acc = iv_union(acc, input_range(nd, i));
        return acc;
      }
      case Prim::Delay:
      case Prim::Fifo: return input_range(nd, 0);
      case Prim::AddressGen: {
        i64 hi = 0;
        for (const auto& cfg : nd.addr) {
          if (!cfg.active) continue;
          if (cfg.bank_out) {
            hi = std::max(hi, vec_product(cfg.view) - 1);
          } else {
            i64 cap = 1;
            for (size_t i = 0; i < cfg.extents.size(); ++i) {
              i64 span = cfg.g[i] * cfg.view[i];
              i64 locals = (cfg.extents[i] + span - 1) / span;
              cap = checked_mul(cap, checked_mul(locals, cfg.g[i]));
            }
            hi = std::max(hi, cap - 1);
          }
        }
        return {0, hi};
      }
      case Prim::ConstMatMul: {
        Interval acc{0, 0};
        bool first = true;
        for (const auto& cfg : nd.addr) {
          if (!cfg.active) continue;
          Interval sum{cfg.map.bias(0), cfg.map.bias(0)};
          for (int c = 0; c < cfg.map.n_in(); ++c) {
            Interval x = input_range(nd, size_t(c));
            Interval term = iv_mul(x, {cfg.map.at(0, c), cfg.map.at(0, c)});
            sum = {checked_add(sum.lo, term.lo), checked_add(sum.hi, term.hi)};
          }
          acc = first ? sum : iv_union(acc, sum);
          first = false;
        }
        return acc;
      }
      case Prim::OutPort: return input_range(nd, 0);
      case Prim::MemWrite: return {0, 0};
    }
    return {0, 0};
  };

  // iterate SCCs in dependency order: repeat sweeps until stable (the
  // condensation is a DAG, so #sweeps is bounded by its depth)
  bool progress = true;
  int guard = 0;
  while (progress && guard++ < n + 2) {
    progress = false;
    for (auto& [cid, ids] : members) {
      bool ready = true;
      bool all_done = true;
      for (int id : ids) all_done &= done[id];
      if (all_done) continue;
      for (int id : ids)
        for (const auto& in : dag.node(id).inputs) {
          if (in.node < 0) continue;
          if (comp[in.node] != cid && !done[in.node]) ready = false;
        }
      if (!ready) continue;
      if (ids.size() == 1 && ![&] {
            // self loop?
            for (const auto& in : dag.node(ids[0]).inputs)
              if (in.node == ids[0]) return true;
            return false;
          }()) {
        DagNode& nd = dag.node(ids[0]);
        nd.range = transfer(nd);
        if (nd.kind != Prim::Counter) nd.width = width_for_range(nd.range);
        done[ids[0]] = 1;
      } else {
        // accumulation or pass-through loop
        bool has_arith = false;
        i64 bound = 1;
        Interval ext{0, 0};
        for (int id : ids) {
          const DagNode& nd = dag.node(id);
          if (nd.kind == Prim::Add || nd.kind == Prim::Reducer) has_arith = true;
          TESSERA_CHECK(nd.kind != Prim::Mul && nd.kind != Prim::ShiftLeft,
                        "multiplicative feedback loop at " + nd.name);
          if (nd.accum_bound > 0) bound = std::max(bound, nd.accum_bound);
          for (const auto& in : nd.inputs) {
            if (in.node < 0 || comp[in.node] == cid) continue;
            const DagNode& src = dag.node(in.node);
            Interval x = src.kind == Prim::Counter ? src.pin_ranges[size_t(in.pin)]
                                                   : src.range;
            ext = iv_union(ext, x);
          }
        }
        Interval r = ext;
        if (has_arith)
          r = {checked_mul(std::min<i64>(ext.lo, 0), bound),
               checked_mul(std::max<i64>(ext.hi, 0), bound)};
        for (int id : ids) {
          DagNode& nd = dag.node(id);
          nd.range = r;
          nd.width = width_for_range(r);
          done[id] = 1;
        }
      }
      progress = true;
    }
  }
  for (const auto& nd : dag.nodes)
    TESSERA_CHECK(nd.dead || done[nd.id], "width inference did not converge at " +
                                              nd.name);

  // committed values must fit the declared output width
  const TensorDecl& out = spec.workload.output_tensor();
  for (const auto& nd : dag.nodes) {
    if (nd.dead || nd.kind != Prim::MemWrite || nd.tensor != out.name) continue;
    const DagNode& data = dag.node(nd.inputs[1].node);
    Interval decl = out.element_signed
                        ? Interval{-(i64(1) << (out.element_width - 1)),
                                   (i64(1) << (out.element_width - 1)) - 1}
                        : Interval{0, (i64(1) << out.element_width) - 1};
    if (data.range.lo < decl.lo || data.range.hi > decl.hi)
      throw SpecError("accumulated range [" + std::to_string(data.range.lo) + "," +
                      std::to_string(data.range.hi) + "] exceeds tensor '" +
                      out.name + "' declared width " +
                      std::to_string(out.element_width));
  }
}

// ---- pipeline ---------------------------------------------------------------

const std::vector<std::string> kOptionalPasses = {
    "extract_reduction", "rewire_broadcast", "reuse_pins", "power_gate"};
const std::vector<std::string> kPipelineOrder = {
    "extract_reduction", "delay_match", "rewire_broadcast",
    "reuse_pins",        "delay_match", "power_gate",
    "infer_bitwidth"};

void run_pipeline(Dag& dag, const FusedDesignSpec& spec,
                  const std::vector<std::string>& enabled,
                  const std::function<void(const std::string&, Dag&)>& after_each) {
  auto on = [&](const std::string& p) {
    return std::find(enabled.begin(), enabled.end(), p) != enabled.end();
  };
  const std::string out_tensor = spec.workload.output_tensor().name;
  LatencyTable lat;
  bool second_match = false;
  for (const auto& pass : kPipelineOrder) {
    if (pass == "extract_reduction") {
      if (!on(pass)) continue;
      extract_reduction(dag);
    } else if (pass == "delay_match") {
      if (second_match && !(on("reuse_pins") || on("rewire_broadcast"))) continue;
      delay_match(dag, lat);
      if (after_each) after_each(second_match ? "delay_match2" : "delay_match", dag);
      second_match = true;
      continue;
    } else if (pass == "rewire_broadcast") {
      if (!on(pass)) continue;
      rewire_broadcast(dag, lat);
    } else if (pass == "reuse_pins") {
      if (!on(pass)) continue;
      reuse_pins(dag, out_tensor);
    } else if (pass == "power_gate") {
      if (!on(pass)) continue;
      power_gate(dag, out_tensor);
    } else if (pass == "infer_bitwidth") {
      infer_bitwidth_inplace(dag, spec);
    }
    if (after_each) after_each(pass, dag);
  }
}

}  // namespace tessera

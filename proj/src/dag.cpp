#include "tessera/dag.hpp"

#include <algorithm>
#include <deque>
#include <functional>

#include <json.hpp>

namespace tessera {

using nlohmann::ordered_json;

const char* prim_name(Prim p) {
  switch (p) {
    case Prim::Counter: return "counter";
    case Prim::AddressGen: return "addrgen";
    case Prim::ConstMatMul: return "matmul";
    case Prim::Add: return "add";
    case Prim::Mul: return "mul";
    case Prim::ShiftLeft: return "shl";
    case Prim::Mux: return "mux";
    case Prim::Reducer: return "reducer";
    case Prim::Delay: return "delay";
    case Prim::Fifo: return "fifo";
    case Prim::MemRead: return "memread";
    case Prim::MemWrite: return "memwrite";
    case Prim::ClockGate: return "clkgate";
    case Prim::CompareGE: return "cmpge";
    case Prim::ConfigReg: return "cfgreg";
    case Prim::InPort: return "inport";
    case Prim::OutPort: return "outport";
  }
  return "?";
}

bool prim_stateful(Prim p) {
  return p == Prim::Delay || p == Prim::Fifo || p == Prim::Counter;
}

bool node_stateful(const DagNode& n) {
  if (n.kind == Prim::Counter) return true;
  if (n.kind == Prim::Delay || n.kind == Prim::Fifo) return n.depth >= 1;
  return false;
}

int Dag::live_count() const {
  int n = 0;
  for (const auto& nd : nodes) n += !nd.dead;
  return n;
}

std::vector<int> Dag::topo_order() const {
  int n = int(nodes.size());
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> out(n);
  for (const auto& nd : nodes) {
    if (nd.dead) continue;
    if (node_stateful(nd)) continue;  // stateful outputs act as sources
    for (const auto& in : nd.inputs) {
      if (in.node < 0) continue;
      out[in.node].push_back(nd.id);
      indeg[nd.id]++;
    }
  }
  std::deque<int> q;
  for (const auto& nd : nodes)
    if (!nd.dead && indeg[nd.id] == 0) q.push_back(nd.id);
  std::vector<int> order;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    order.push_back(u);
    for (int v : out[u])
      if (--indeg[v] == 0) q.push_back(v);
  }
  return order;  // callers compare size against live_count for cycle checks
}

std::vector<std::vector<PinRef>> Dag::consumers() const {
  std::vector<std::vector<PinRef>> out(nodes.size());
  for (const auto& nd : nodes) {
    if (nd.dead) continue;
    for (size_t p = 0; p < nd.inputs.size(); ++p)
      if (nd.inputs[p].node >= 0)
        out[nd.inputs[p].node].push_back({nd.id, int(p)});
  }
  return out;
}

int width_for_range(const Interval& r) {
  TESSERA_CHECK(r.lo <= r.hi, "width_for_range: empty interval");
  if (r.lo >= 0) {
    int w = 1;
    while (w < 63 && (i64(1) << w) - 1 < r.hi) ++w;
    return w;
  }
  int w = 1;
  while (w < 64 && ((i64(1) << (w - 1)) - 1 < r.hi || -(i64(1) << (w - 1)) > r.lo))
    ++w;
  return w;
}

static bool arity_ok(const DagNode& n) {
  size_t k = n.inputs.size();
  size_t gate = n.gated ? 1 : 0;
  switch (n.kind) {
    case Prim::Counter: return k == 1;
    case Prim::AddressGen: return int(k) == n.counter_dims;
    case Prim::ConstMatMul: return k >= 1;
    case Prim::Add:
    case Prim::Mul:
    case Prim::ShiftLeft: return k == 2;
    case Prim::Mux: return k >= 3;
    case Prim::Reducer: return k >= 2;
    case Prim::Delay:
    case Prim::Fifo: return k == 1 + gate;
    case Prim::MemRead: return k == 1;
    case Prim::MemWrite: return k == 3;
    case Prim::ClockGate: return k == 1;
    case Prim::CompareGE: return k == 1;
    case Prim::ConfigReg:
    case Prim::InPort: return k == 0;
    case Prim::OutPort: return k == 1;
  }
  return false;
}

std::vector<std::string> check_wellformed(const Dag& dag) {
  std::vector<std::string> issues;
  for (const auto& n : dag.nodes) {
    if (n.dead) continue;
    if (!arity_ok(n))
      issues.push_back(n.name + ": " + std::to_string(n.inputs.size()) +
                       " inputs violates " + prim_name(n.kind) + " arity");
    for (const auto& in : n.inputs) {
      if (in.node < 0 || in.node >= int(dag.nodes.size()) || dag.node(in.node).dead)
        issues.push_back(n.name + ": dangling input pin");
      else if (in.pin < 0 || in.pin >= dag.node(in.node).out_pins())
        issues.push_back(n.name + ": input from nonexistent pin " +
                         std::to_string(in.pin) + " of " + dag.node(in.node).name);
    }
  }
  if (int(dag.topo_order().size()) != dag.live_count()) {
    // locate one offending cycle for the report
    std::vector<int> state(dag.nodes.size(), 0);
    std::vector<int> stack;
    std::string cyc;
    std::function<bool(int)> dfs = [&](int u) -> bool {
      state[u] = 1;
      stack.push_back(u);
      const auto& nd = dag.node(u);
      if (!node_stateful(nd))
        for (const auto& in : nd.inputs) {
          if (in.node < 0 || dag.node(in.node).dead) continue;
          if (state[in.node] == 1) {
            cyc = dag.node(in.node).name;
            for (auto it = std::find(stack.begin(), stack.end(), in.node);
                 it != stack.end(); ++it)
              cyc += " <- " + dag.node(*it).name;
            return true;
          }
          if (state[in.node] == 0 && dfs(in.node)) return true;
        }
      state[u] = 2;
      stack.pop_back();
      return false;
    };
    for (const auto& n : dag.nodes)
      if (!n.dead && state[n.id] == 0 && dfs(n.id)) break;
    issues.push_back("combinational cycle: " + cyc);
  }
  for (const auto& n : dag.nodes) {
    if (n.dead || n.width == 0) continue;
    if (n.width < width_for_range(n.range))
      issues.push_back(n.name + ": width " + std::to_string(n.width) +
                       " cannot hold range [" + std::to_string(n.range.lo) + "," +
                       std::to_string(n.range.hi) + "]");
  }
  return issues;
}

static ordered_json vec_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (i64 x : v) a.push_back(x);
  return a;
}

std::string dag_to_json(const Dag& dag) {
  ordered_json j;
  j["n_dataflows"] = dag.n_dataflows;
  j["matched"] = dag.matched;
  ordered_json nodes = ordered_json::array();
  auto order = dag.topo_order();
  std::vector<int> pos(dag.nodes.size(), -1);
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = int(i);
  for (int id : order) {
    const DagNode& n = dag.node(id);
    ordered_json nj;
    nj["name"] = n.name;
    nj["kind"] = prim_name(n.kind);
    if (n.kind == Prim::Delay || n.kind == Prim::Fifo) {
      nj["depth"] = n.depth;
      nj["tag"] = int(n.tag);
    }
    if (n.latency) nj["latency"] = n.latency;
    if (!n.df_value.empty()) nj["config"] = vec_json(n.df_value);
    if (!n.tensor.empty()) nj["tensor"] = n.tensor;
    if (n.bank >= 0) nj["bank"] = n.bank;
    if (!n.fu.empty()) nj["fu"] = vec_json(n.fu);
    if (n.width) {
      nj["width"] = n.width;
      nj["range"] = {n.range.lo, n.range.hi};
    }
    ordered_json ins = ordered_json::array();
    for (const auto& in : n.inputs) {
      ordered_json e;
      e["from"] = dag.node(in.node).name;
      if (in.pin) e["pin"] = in.pin;
      ins.push_back(e);
    }
    nj["inputs"] = ins;
    nodes.push_back(nj);
  }
  j["nodes"] = nodes;
  return j.dump(2) + "\n";
}


std::vector<int> scc_components(const Dag& dag) {
  int n = int(dag.nodes.size());
  std::vector<int> comp(n, -1), low(n), num(n, -1), stk;
  std::vector<char> onstk(n, 0);
  int idx = 0, nc = 0;
  std::vector<std::vector<int>> out(n);
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    for (const auto& in : nd.inputs)
      if (in.node >= 0 && !dag.node(in.node).dead) out[in.node].push_back(nd.id);
  }
  struct Frame {
    int v;
    size_t ei;
  };
  for (int s = 0; s < n; ++s) {
    if (dag.nodes[size_t(s)].dead || num[s] >= 0) continue;
    std::vector<Frame> call{{s, 0}};
    num[s] = low[s] = idx++;
    stk.push_back(s);
    onstk[s] = 1;
    while (!call.empty()) {
      auto& f = call.back();
      if (f.ei < out[f.v].size()) {
        int w = out[f.v][f.ei++];
        if (num[w] < 0) {
          num[w] = low[w] = idx++;
          stk.push_back(w);
          onstk[w] = 1;
          call.push_back({w, 0});
        } else if (onstk[w]) {
          low[f.v] = std::min(low[f.v], num[w]);
        }
      } else {
        if (low[f.v] == num[f.v]) {
          while (true) {
            int w = stk.back();
            stk.pop_back();
            onstk[w] = 0;
            comp[w] = nc;
            if (w == f.v) break;
          }
          ++nc;
        }
        int v = f.v;
        call.pop_back();
        if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      }
    }
  }
  return comp;
}

}  // namespace tessera

#include "tessera/sim.hpp"

#include <algorithm>
#include <deque>

namespace tessera {

MemoryImage MemoryImage::zeros(const FusedDesignSpec& spec) {
  MemoryImage img;
  for (const auto& t : spec.workload.tensors) {
    MemoryImage::Tensor mt;
    mt.extents = spec.tensor_extents(t);
    mt.flat.assign(size_t(vec_product(mt.extents)), 0);
    img.tensors[t.name] = std::move(mt);
  }
  return img;
}

i64& MemoryImage::at(const std::string& name, const Vec& idx) {
  auto& t = tensors.at(name);
  return t.flat[size_t(linearize(idx, t.extents))];
}

i64 MemoryImage::at(const std::string& name, const Vec& idx) const {
  const auto& t = tensors.at(name);
  return t.flat[size_t(linearize(idx, t.extents))];
}

std::vector<std::vector<i64>> scatter_banked(const MemoryImage::Tensor& t,
                                             const TensorBanking& tb, int dataflow) {
  std::vector<std::vector<i64>> banks(size_t(tb.physical_banks));
  for (auto& b : banks) b.assign(size_t(tb.bank_capacity), 0);
  const BankDims& dims = tb.per_df[size_t(dataflow)];
  for_each_point(t.extents, [&](const Vec& d) {
    banks[size_t(bank_of(d, dims))][size_t(bank_addr(d, dims, t.extents))] =
        t.flat[size_t(linearize(d, t.extents))];
  });
  return banks;
}

void gather_banked(const std::vector<std::vector<i64>>& banks,
                   const TensorBanking& tb, int dataflow, MemoryImage::Tensor& t) {
  const BankDims& dims = tb.per_df[size_t(dataflow)];
  for_each_point(t.extents, [&](const Vec& d) {
    t.flat[size_t(linearize(d, t.extents))] =
        banks[size_t(bank_of(d, dims))][size_t(bank_addr(d, dims, t.extents))];
  });
}

CostReport cost_report(const Dag& dag) {
  CostReport r;
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    switch (nd.kind) {
      case Prim::Delay:
        r.register_bits += nd.depth * std::max(nd.width, 1);
        break;
      case Prim::Fifo:
        r.fifo_bits += nd.depth * std::max(nd.width, 1);
        break;
      case Prim::Add: r.adder_count += 1; break;
      case Prim::Mul: r.mul_count += 1; break;
      case Prim::Mux: r.mux_count += 1; break;
      case Prim::Reducer:
        r.reducer_ports += i64(nd.inputs.size());
        r.adder_count += i64(nd.inputs.size()) - 1;
        break;
      default: break;
    }
  }
  return r;
}

// ---- simulator --------------------------------------------------------------

namespace {

struct NodeState {
  std::deque<i64> delay;     // Delay/Fifo contents (front = oldest)
  std::deque<i64> pipeline;  // structural latency stages (matched graphs)
  Vec t;                     // Counter
  bool done = false;
};

i64 addr_eval(const DagNode::AddrCfg& cfg, const Vec& t) {
  Vec d = cfg.map.apply(t);
  BankDims dims;
  dims.g = cfg.g;
  dims.view = cfg.view;
  if (cfg.bank_out) return bank_of(d, dims);
  return bank_addr(d, dims, cfg.extents);
}

}  // namespace

SimResult simulate(const Dag& dag, const FusedDesignSpec& spec,
                   const BankingPlan& banking, int dataflow,
                   const MemoryImage& inputs, i64 cycles, bool want_trace) {
  TESSERA_CHECK(dataflow >= 0 && dataflow < dag.n_dataflows, "bad dataflow index");
  const size_t k = size_t(dataflow);

  if (cycles < 0) cycles = 2 * estimate_performance(dag, spec, dataflow) + 64;

  // banked memory contents
  std::map<std::string, std::vector<std::vector<i64>>> banks;
  for (const auto& tb : banking.tensors) {
    const TensorDecl& decl = spec.workload.tensor(tb.tensor);
    auto it = inputs.tensors.find(tb.tensor);
    MemoryImage::Tensor zero;
    if (it == inputs.tensors.end() || decl.role == TensorRole::Output) {
      zero.extents = tb.extents;
      zero.flat.assign(size_t(vec_product(tb.extents)), 0);
    }
    const MemoryImage::Tensor& src =
        (it != inputs.tensors.end() && decl.role == TensorRole::Input) ? it->second
                                                                       : zero;
    TESSERA_CHECK(src.extents == tb.extents,
                  "input tensor " + tb.tensor + " extent mismatch");
    banks[tb.tensor] = scatter_banked(src, tb, dataflow);
  }

  auto order = dag.topo_order();
  TESSERA_CHECK(int(order.size()) == dag.live_count(),
                "simulate: combinational cycle");

  std::vector<NodeState> state(dag.nodes.size());
  std::vector<std::vector<i64>> visible(dag.nodes.size());
  std::vector<i64> raw(dag.nodes.size(), 0);
  std::vector<char> settled(dag.nodes.size(), 0);

  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    visible[nd.id].assign(size_t(nd.out_pins()), 0);
    auto& st = state[nd.id];
    if (nd.kind == Prim::Delay || nd.kind == Prim::Fifo)
      st.delay.assign(size_t(std::max<i64>(nd.depth, 0)), 0);
    if (nd.kind == Prim::Counter) st.t.assign(size_t(nd.counter_dims), 0);
    if (dag.matched && nd.latency > 0) st.pipeline.assign(size_t(nd.latency), 0);
  }

  SimResult res;
  res.cycles_run = cycles;
  std::vector<i64> last_out(dag.nodes.size(), 0);

  auto in_val = [&](const DagNode& nd, size_t i) -> i64 {
    const PinRef& in = nd.inputs[i];
    TESSERA_CHECK(in.node >= 0, nd.name + ": unconnected pin");
    TESSERA_CHECK(settled[in.node] || node_stateful(dag.node(in.node)),
                  nd.name + ": reads unsettled value from " +
                      dag.node(in.node).name);
    return visible[in.node][size_t(in.pin)];
  };

  for (i64 w = 0; w < cycles; ++w) {
    // phase 1: stateful outputs become visible
    std::fill(settled.begin(), settled.end(), 0);
    for (const auto& nd : dag.nodes) {
      if (nd.dead) continue;
      auto& st = state[nd.id];
      if (nd.kind == Prim::Counter) {
        for (int j = 0; j < nd.counter_dims; ++j) visible[nd.id][size_t(j)] = st.t[size_t(j)];
        visible[nd.id][size_t(nd.counter_dims)] = st.done ? 0 : 1;
        visible[nd.id][size_t(nd.counter_dims) + 1] =
            timestamp_scalar(st.t, nd.df_radix[k]);
        settled[nd.id] = 1;
      } else if (node_stateful(nd)) {
        i64 tap = nd.depth;
        if (nd.kind == Prim::Fifo) tap = nd.df_value[k];
        TESSERA_CHECK(tap >= 1 && tap <= nd.depth, nd.name + ": bad FIFO tap");
        visible[nd.id][0] = st.delay[st.delay.size() - size_t(tap)];
        settled[nd.id] = 1;
      }
    }
    // phase 2: combinational settle in topological order
    for (int id : order) {
      const DagNode& nd = dag.node(id);
      if (node_stateful(nd)) {  // raw input computed for the update phase
        raw[id] = in_val(nd, 0);
        continue;
      }
      i64 v = 0;
      switch (nd.kind) {
        case Prim::InPort: v = 1; break;
        case Prim::ConfigReg: v = nd.df_value[k]; break;
        case Prim::ClockGate: v = in_val(nd, 0); break;
        case Prim::CompareGE: {
          bool ge = in_val(nd, 0) >= nd.df_value[k];
          v = (ge != nd.invert) ? 1 : 0;
          break;
        }
        case Prim::Add: v = checked_add(in_val(nd, 0), in_val(nd, 1)); break;
        case Prim::Mul: v = checked_mul(in_val(nd, 0), in_val(nd, 1)); break;
        case Prim::ShiftLeft: {
          i64 sh = in_val(nd, 1);
          TESSERA_CHECK(sh >= 0 && sh <= 62, nd.name + ": bad shift");
          v = checked_mul(in_val(nd, 0), i64(1) << sh);
          break;
        }
        case Prim::Mux: {
          i64 sel = in_val(nd, 0);
          TESSERA_CHECK(sel >= 0 && sel + 1 < i64(nd.inputs.size()),
                        nd.name + ": mux select out of range");
          v = in_val(nd, size_t(1 + sel));
          break;
        }
        case Prim::Reducer: {
          for (size_t i = 0; i < nd.inputs.size(); ++i)
            v = checked_add(v, in_val(nd, i));
          break;
        }
        case Prim::Delay: v = in_val(nd, 0); break;  // depth 0: wire
        case Prim::MemRead: {
          const auto& bank = banks.at(nd.tensor)[size_t(nd.bank)];
          i64 a = in_val(nd, 0);
          TESSERA_CHECK(a >= 0 && a < i64(bank.size()),
                        nd.name + ": address out of range");
          v = bank[size_t(a)];
          break;
        }
        case Prim::AddressGen: {
          const auto& cfg = nd.addr[k];
          if (!cfg.active) {
            v = 0;
            break;
          }
          Vec t(size_t(nd.counter_dims));
          for (int j = 0; j < nd.counter_dims; ++j) t[size_t(j)] = in_val(nd, size_t(j));
          v = addr_eval(cfg, t);
          break;
        }
        case Prim::ConstMatMul: {
          const auto& cfg = nd.addr[k];
          if (!cfg.active) {
            v = 0;
            break;
          }
          Vec x(nd.inputs.size());
          for (size_t i = 0; i < nd.inputs.size(); ++i) x[i] = in_val(nd, i);
          v = cfg.map.apply(x)[0];
          break;
        }
        case Prim::OutPort:
        case Prim::MemWrite: v = in_val(nd, 0); break;
        default: throw InternalError("simulate: unhandled node " + nd.name);
      }
      // structural latency pipeline (post-matching)
      i64 out = v;
      if (dag.matched && nd.latency > 0) {
        auto& pipe = state[nd.id].pipeline;
        out = pipe.front();
        pipe.pop_front();
        pipe.push_back(v);
      }
      if (nd.width > 0 && nd.kind != Prim::MemWrite) {
        TESSERA_CHECK(out >= nd.range.lo && out <= nd.range.hi,
                      nd.name + ": value " + std::to_string(out) +
                          " escapes inferred range");
      }
      visible[nd.id][0] = out;
      raw[id] = v;
      settled[nd.id] = 1;
    }
    // phase 3: state update
    for (const auto& nd : dag.nodes) {
      if (nd.dead) continue;
      auto& st = state[nd.id];
      if (nd.kind == Prim::Counter) {
        if (in_val(nd, 0) != 0 && !st.done) {
          const Vec& radix = nd.df_radix[k];
          int j = nd.counter_dims - 1;
          for (; j >= 0; --j) {
            if (++st.t[size_t(j)] < radix[size_t(j)]) break;
            st.t[size_t(j)] = 0;
          }
          if (j < 0) {
            st.done = true;
            for (int d = 0; d < nd.counter_dims; ++d)
              st.t[size_t(d)] = radix[size_t(d)] - 1;
          }
        }
      } else if (node_stateful(nd)) {
        bool enabled = true;
        if (nd.gated) enabled = in_val(nd, nd.inputs.size() - 1) != 0;
        if (enabled) {
          st.delay.pop_front();
          st.delay.push_back(raw[nd.id]);
        }
      } else if (nd.kind == Prim::MemWrite) {
        i64 en = in_val(nd, 2);
        if (en != 0) {
          auto& bank = banks.at(nd.tensor)[size_t(nd.bank)];
          i64 a = in_val(nd, 0);
          TESSERA_CHECK(a >= 0 && a < i64(bank.size()),
                        nd.name + ": write address out of range");
          bank[size_t(a)] = in_val(nd, 1);
          res.completion_cycle = w;
        }
      }
      if (want_trace && (nd.kind == Prim::Delay || nd.kind == Prim::Fifo) &&
          nd.depth >= 1) {
        if (visible[nd.id][0] != last_out[nd.id]) res.toggles[nd.name] += 1;
        last_out[nd.id] = visible[nd.id][0];
      }
    }
  }

  // gather outputs
  res.outputs = MemoryImage{};
  for (const auto& tb : banking.tensors) {
    const TensorDecl& decl = spec.workload.tensor(tb.tensor);
    if (decl.role != TensorRole::Output) continue;
    MemoryImage::Tensor t;
    t.extents = tb.extents;
    t.flat.assign(size_t(vec_product(tb.extents)), 0);
    gather_banked(banks.at(tb.tensor), tb, dataflow, t);
    res.outputs.tensors[tb.tensor] = std::move(t);
  }
  return res;
}

MemoryImage reference_execute(const FusedDesignSpec& spec, const MemoryImage& inputs) {
  const WorkloadSpec& w = spec.workload;
  MemoryImage out;
  const TensorDecl& decl = w.output_tensor();
  MemoryImage::Tensor t;
  t.extents = spec.tensor_extents(decl);
  t.flat.assign(size_t(vec_product(t.extents)), 0);
  out.tensors[decl.name] = std::move(t);

  Vec ext = spec.iter_extents();
  std::vector<const TensorDecl*> ins = w.input_tensors();
  for_each_point(ext, [&](const Vec& i) {
    std::map<std::string, i64> operands;
    for (const auto* td : ins)
      operands[td->name] = inputs.at(td->name, td->access.apply(i));
    i64 term = eval_compute(*w.compute.root, operands);
    auto& y = out.tensors[decl.name];
    size_t idx = size_t(linearize(decl.access.apply(i), y.extents));
    y.flat[idx] = checked_add(y.flat[idx], term);
  });
  return out;
}

i64 estimate_performance(const Dag& dag, const FusedDesignSpec& spec, int dataflow) {
  const size_t k = size_t(dataflow);
  i64 steps = vec_product(spec.dataflows[k].for_sizes);

  auto comp = scc_components(dag);
  auto weight = [&](const DagNode& nd) -> i64 {
    i64 w = nd.latency;
    if (nd.kind == Prim::Delay) w += nd.depth;
    if (nd.kind == Prim::Fifo) w += nd.df_value[k];
    return w;
  };

  // condensation topological order (in-SCC edges ignored)
  int n = int(dag.nodes.size());
  int nc = 0;
  for (const auto& nd : dag.nodes)
    if (!nd.dead) nc = std::max(nc, comp[nd.id] + 1);
  std::vector<int> indeg(nc, 0);
  std::vector<std::vector<int>> cout(nc);
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    for (const auto& in : nd.inputs) {
      if (in.node < 0 || dag.node(in.node).dead) continue;
      int a = comp[in.node], b = comp[nd.id];
      if (a != b) {
        cout[a].push_back(b);
        indeg[b]++;
      }
    }
  }
  std::deque<int> q;
  for (int c = 0; c < nc; ++c)
    if (indeg[c] == 0) q.push_back(c);
  std::vector<int> corder;
  while (!q.empty()) {
    int c = q.front();
    q.pop_front();
    corder.push_back(c);
    for (int b : cout[c])
      if (--indeg[b] == 0) q.push_back(b);
  }
  std::vector<std::vector<int>> members(nc);
  for (const auto& nd : dag.nodes)
    if (!nd.dead) members[comp[nd.id]].push_back(nd.id);

  std::vector<i64> arrive(n, 0);
  i64 best = 0;
  for (int c : corder) {
    for (int id : members[c]) {
      const DagNode& nd = dag.node(id);
      i64 a = 0;
      for (const auto& in : nd.inputs) {
        if (in.node < 0) continue;
        const DagNode& src = dag.node(in.node);
        if (src.kind == Prim::ConfigReg || src.kind == Prim::InPort) continue;
        if (comp[in.node] == comp[id]) continue;  // accumulation feedback
        a = std::max(a, arrive[in.node]);
      }
      arrive[id] = a + weight(nd);
      if (nd.kind == Prim::MemWrite) best = std::max(best, a);
    }
  }
  return steps + best;
}

}  // namespace tessera

#include "tessera/adg.hpp"

#include <algorithm>

#include <json.hpp>

namespace tessera {

using nlohmann::ordered_json;

const TensorPlan& Adg::tensor_plan(const std::string& name) const {
  for (const auto& t : plan.tensors)
    if (t.tensor == name) return t;
  throw InternalError("no plan for tensor " + name);
}

std::vector<std::string> check_adg(const Adg& adg) {
  std::vector<std::string> issues;
  int n_df = int(adg.spec.dataflows.size());
  for (const auto& tp : adg.plan.tensors) {
    for (int k = 0; k < n_df; ++k) {
      const Vec& grid = adg.spec.dataflows[k].par_sizes;
      std::map<Vec, int> inbound;
      for (const auto& e : tp.edges) {
        if (!e.per_df[k].active) continue;
        if (!fu_in_grid(e.src, grid) || !fu_in_grid(e.dst, grid))
          issues.push_back("tensor " + tp.tensor + ": edge " + vec_str(e.src) +
                           "->" + vec_str(e.dst) + " leaves dataflow " +
                           std::to_string(k) + " grid");
        inbound[e.dst]++;
      }
      for (const auto& [fu, n] : inbound)
        if (n > 1)
          issues.push_back("tensor " + tp.tensor + ": FU " + vec_str(fu) +
                           " has " + std::to_string(n) +
                           " active inbound edges in dataflow " + std::to_string(k));
      // forest: walk parents, detect cycles
      std::map<Vec, Vec> parent;
      for (const auto& e : tp.edges)
        if (e.per_df[k].active) parent[e.dst] = e.src;
      for (const auto& [fu, p] : parent) {
        Vec u = fu;
        size_t steps = 0;
        while (parent.count(u) && steps++ <= parent.size()) u = parent.at(u);
        if (steps > parent.size())
          issues.push_back("tensor " + tp.tensor + ": cycle through " + vec_str(fu) +
                           " in dataflow " + std::to_string(k));
      }
    }
    for (const auto& [fu, dfs] : tp.data_nodes) {
      bool found = false;
      for (const auto& port : adg.fabric.ports)
        found |= port.tensor == tp.tensor && port.fu == fu;
      if (!found)
        issues.push_back("tensor " + tp.tensor + ": data node " + vec_str(fu) +
                         " missing from the switch fabric");
    }
  }
  return issues;
}

Adg build_adg(const FusedDesignSpec& spec, InterconnectPlan plan,
              BankingPlan banking, SwitchFabric fabric) {
  Adg adg;
  adg.spec = spec;
  adg.fu_grid = spec.fu_array_shape();
  adg.plan = std::move(plan);
  adg.banking = std::move(banking);
  adg.fabric = std::move(fabric);
  auto issues = check_adg(adg);
  if (!issues.empty()) throw InternalError("ADG inconsistent: " + issues.front());
  return adg;
}

static ordered_json vec_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (i64 x : v) a.push_back(x);
  return a;
}

std::string adg_to_json(const Adg& adg) {
  ordered_json j;
  j["fu_grid"] = vec_json(adg.fu_grid);
  ordered_json dfs = ordered_json::array();
  for (const auto& df : adg.spec.dataflows) {
    ordered_json d;
    d["name"] = df.name;
    d["control"] = vec_json(df.control);
    d["for_sizes"] = vec_json(df.for_sizes);
    d["par_sizes"] = vec_json(df.par_sizes);
    dfs.push_back(d);
  }
  j["dataflows"] = dfs;
  ordered_json tensors = ordered_json::array();
  for (const auto& tp : adg.plan.tensors) {
    ordered_json t;
    t["tensor"] = tp.tensor;
    t["output"] = tp.is_output;
    ordered_json edges = ordered_json::array();
    for (const auto& e : tp.edges) {
      ordered_json ej;
      ej["src"] = vec_json(e.src);
      ej["dst"] = vec_json(e.dst);
      ej["kind"] = e.kind == ReuseKind::Direct ? "direct" : "delay";
      ej["physical_depth"] = e.physical_depth;
      ordered_json per = ordered_json::array();
      for (const auto& pd : e.per_df) {
        ordered_json p;
        p["active"] = pd.active;
        if (pd.active) {
          p["depth"] = pd.depth;
          p["delta_t"] = vec_json(pd.delta_t);
        }
        per.push_back(p);
      }
      ej["per_dataflow"] = per;
      edges.push_back(ej);
    }
    t["edges"] = edges;
    ordered_json nodes = ordered_json::array();
    for (const auto& [fu, set] : tp.data_nodes) {
      ordered_json n;
      n["fu"] = vec_json(fu);
      ordered_json act = ordered_json::array();
      for (int k : set) act.push_back(k);
      n["dataflows"] = act;
      nodes.push_back(n);
    }
    t["data_nodes"] = nodes;
    ordered_json holds = ordered_json::array();
    for (const auto& h : tp.hold) {
      ordered_json hj;
      hj["present"] = h.present;
      if (h.present) {
        hj["depth"] = h.depth;
        hj["delta_t"] = vec_json(h.delta_t);
      }
      holds.push_back(hj);
    }
    t["hold_per_dataflow"] = holds;
    tensors.push_back(t);
  }
  j["tensors"] = tensors;
  ordered_json banks = ordered_json::array();
  for (const auto& tb : adg.banking.tensors) {
    ordered_json b;
    b["tensor"] = tb.tensor;
    b["physical_banks"] = tb.physical_banks;
    b["bank_capacity"] = tb.bank_capacity;
    b["extents"] = vec_json(tb.extents);
    ordered_json per = ordered_json::array();
    for (const auto& d : tb.per_df) {
      ordered_json p;
      p["B"] = vec_json(d.B);
      p["g"] = vec_json(d.g);
      p["view"] = vec_json(d.view);
      per.push_back(p);
    }
    b["per_dataflow"] = per;
    banks.push_back(b);
  }
  j["banking"] = banks;
  ordered_json ports = ordered_json::array();
  for (const auto& p : adg.fabric.ports) {
    ordered_json pj;
    pj["tensor"] = p.tensor;
    pj["fu"] = vec_json(p.fu);
    pj["write"] = p.write;
    ordered_json bd = ordered_json::array();
    for (const auto& s : p.banks_per_df) {
      ordered_json a = ordered_json::array();
      for (i64 b : s) a.push_back(b);
      bd.push_back(a);
    }
    pj["banks_per_dataflow"] = bd;
    ports.push_back(pj);
  }
  j["switches"] = ports;
  return j.dump(2) + "\n";
}

}  // namespace tessera
